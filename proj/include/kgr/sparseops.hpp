#pragma once
// TensorLog adjacency operators and left vector-operator products.
//
// Operators are row-indexed (semantic CSR) because every product in the score
// chain multiplies from the left: s = v_h * M_r1 * ... * M_rl. Slot 0 of an
// operator set is the identity matrix; relation r lives at slot 1 + r.

#include <cstdint>
#include <span>
#include <vector>

#include "kgr/common.hpp"
#include "kgr/kgdata.hpp"

namespace kgr {

// One directed edge to drop from an operator during a product, keyed by the
// relation id the operator represents. Identity is never excluded.
struct ExcludedEdge {
    RelationId rel = -1;
    EntityId head = -1;
    EntityId tail = -1;
};

struct SparseOperator {
    RelationId rel = -1;  // -1 for identity
    std::int64_t n = 0;   // square shape
    std::vector<std::int64_t> row_ptr;  // n + 1
    std::vector<EntityId> cols;         // sorted within each row, unique
    // Empty means unit weights (TensorLog 0/1 operator); otherwise one weight
    // per cols entry, >= 0.
    std::vector<double> weights;

    std::int64_t nnz() const { return static_cast<std::int64_t>(cols.size()); }
    bool has_entry(EntityId i, EntityId j) const;
};

struct OperatorSet {
    std::vector<SparseOperator> ops;  // [identity, r_0, ..., r_{K-1}]
    std::int64_t num_entities = 0;

    const SparseOperator& identity() const { return ops.front(); }
    const SparseOperator& relation(RelationId r) const {
        return ops.at(static_cast<std::size_t>(r) + 1);
    }
    std::int64_t num_relation_ops() const { return static_cast<std::int64_t>(ops.size()) - 1; }
    // Out-neighbors of e over the union of all relation operators.
    std::span<const EntityId> any_neighbors(EntityId e) const;

    std::vector<std::int64_t> any_row_ptr;
    std::vector<EntityId> any_cols;
};

// One 0/1 operator per relation id in the vocabulary (inverse relations get
// the transpose adjacency), plus the identity at slot 0. Duplicate edges in g
// collapse to a single unit entry.
OperatorSet build_operators(const std::vector<Triple>& g, const Vocabulary& vocab);

// out[j] = sum_i v[i] * w(i, j) over entries of op, skipping excluded edges
// whose rel matches op.rel. Pure; v.size() must equal op.n.
std::vector<double> vec_matmul(std::span<const double> v, const SparseOperator& op,
                               std::span<const ExcludedEdge> exclude = {});

// Number of relation-labeled walks h -> t following `pattern` over 0/1
// operators; equals onehot(h)^T M_r1 ... M_rl onehot(t).
std::uint64_t count_paths(EntityId h, EntityId t, std::span<const RelationId> pattern,
                          const OperatorSet& ops, std::span<const ExcludedEdge> exclude = {});

// Walk counts from h to every entity (same chain as count_paths).
std::vector<std::uint64_t> count_paths_from(EntityId h, std::span<const RelationId> pattern,
                                            const OperatorSet& ops,
                                            std::span<const ExcludedEdge> exclude = {});

}  // namespace kgr
