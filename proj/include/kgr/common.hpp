#pragma once
// Shared ids, error types and small helpers used across the engine.

#include <cstdint>
#include <stdexcept>
#include <string>

namespace kgr {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

// Reserved relation id for the PAD degree slot of isolated entities.
inline constexpr RelationId kPadRelation = -1;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated precondition / shape mismatch on a public operation.
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

// NaN/Inf surfaced by a numeric kernel.
struct NumericFault : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void contract(bool ok, const std::string& what) {
    if (!ok) throw ContractViolation(what);
}

}  // namespace kgr
