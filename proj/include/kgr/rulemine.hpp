#pragma once
// Explicit Horn rules recovered from trained attention tensors. Confidence of
// an operator sequence (k_1 .. k_L) is sum_j prod_l a[j][l][k_l]; sequences
// that differ only in identity-hop placement merge into one rule.

#include <string>
#include <vector>

#include "kgr/degreembed.hpp"
#include "kgr/kgdata.hpp"

namespace kgr {

struct RulePattern {
    std::vector<RelationId> body;  // identity hops elided, non-empty
    RelationId head = -1;
};

struct ScoredRule {
    RulePattern pattern;
    double confidence = 0.0;  // rank-summed alpha
    double normalized = 0.0;  // alpha / max alpha over the same head
};

struct RuleExtraction {
    std::vector<ScoredRule> rules;  // confidence desc, then lexicographic body
    // Mass of the all-identity sequence bucket (empty body, not a rule).
    double empty_body_alpha = 0.0;
    // Sum over every merged bucket including the empty one; equals T up to
    // floating point (partition of unity per rank).
    double total_alpha = 0.0;
};

// Enumerates all (n_ops)^L operator sequences of `attn` and merges them by
// elided body; emits at most top_n rules. top_n <= 0 is a contract violation.
RuleExtraction extract_rules(const AttentionTensor& attn, RelationId head, std::int64_t top_n);

// Rules with normalized confidence below this are left out of reports.
inline constexpr double kRuleReportFloor = 0.01;

// TSV: head, body joined by " ^ ", confidence, normalized (6 significant digits).
std::string rule_report_tsv(const std::vector<ScoredRule>& rules, const Vocabulary& vocab);

}  // namespace kgr
