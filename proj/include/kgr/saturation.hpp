#pragma once
// Structural rule-quality scores over the reasoning graph, via exhaustive
// path enumeration:
//   macro  gamma = fraction of (h, q, t) triples connected by >= 1 pattern path
//   micro  delta = mean share of the pattern's paths among all universe paths
//   comprehensive eta = gamma * delta
// The triple's own edge (h, q, t) is removed from the graph while its paths
// are counted. Patterns range over base relations.

#include <span>
#include <string>
#include <vector>

#include "kgr/kgdata.hpp"
#include "kgr/sparseops.hpp"

namespace kgr {

struct SaturationRecord {
    RelationId head = -1;
    std::vector<RelationId> pattern;
    double gamma = 0.0;
    double delta = 0.0;
    double eta = 0.0;
};

struct SaturationOptions {
    std::int64_t max_len = 2;  // L; pattern universe is lengths 2..L
    // Adds length-1 patterns to the universe (the paper's path-universe
    // definition is ambiguous on these).
    bool include_len1 = false;
    std::int64_t top_n = -1;  // per head; -1 keeps everything with gamma > 0
};

double macro_saturation(std::span<const RelationId> pattern, RelationId q,
                        const std::vector<Triple>& g, const Vocabulary& vocab,
                        const SaturationOptions& opt = {});

double micro_saturation(std::span<const RelationId> pattern, RelationId q,
                        const std::vector<Triple>& g, const Vocabulary& vocab,
                        const SaturationOptions& opt = {});

// All patterns with gamma > 0 for each query relation, eta-descending per
// head block (heads keep the order given in `queries`).
std::vector<SaturationRecord> saturation_report(const std::vector<Triple>& g,
                                                const Vocabulary& vocab,
                                                std::span<const RelationId> queries,
                                                const SaturationOptions& opt);

// TSV: head, pattern (relations joined by " ^ "), gamma, delta, eta.
std::string saturation_report_tsv(std::span<const SaturationRecord> records,
                                  const Vocabulary& vocab);

}  // namespace kgr
