#include "kgr/rulemine.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace kgr {

RuleExtraction extract_rules(const AttentionTensor& attn, RelationId head, std::int64_t top_n) {
    contract(top_n > 0, "extract_rules: top_n must be positive");
    contract(attn.rank >= 1 && attn.length >= 1 && attn.n_ops >= 1, "extract_rules: empty tensor");

    // Walk the full sequence space (k_1..k_L) with an odometer; bodies keep
    // only non-identity hops.
    std::map<std::vector<RelationId>, double> merged;
    std::vector<std::int64_t> seq(static_cast<std::size_t>(attn.length), 0);
    std::vector<RelationId> body;
    for (;;) {
        double alpha = 0.0;
        for (std::int64_t j = 0; j < attn.rank; ++j) {
            double prod = 1.0;
            for (std::int64_t l = 0; l < attn.length; ++l)
                prod *= attn.at(j, l, seq[static_cast<std::size_t>(l)]);
            alpha += prod;
        }
        body.clear();
        for (std::int64_t l = 0; l < attn.length; ++l)
            if (seq[static_cast<std::size_t>(l)] != 0)
                body.push_back(static_cast<RelationId>(seq[static_cast<std::size_t>(l)] - 1));
        merged[body] += alpha;

        std::int64_t pos = attn.length - 1;
        while (pos >= 0 && ++seq[static_cast<std::size_t>(pos)] == attn.n_ops)
            seq[static_cast<std::size_t>(pos--)] = 0;
        if (pos < 0) break;
    }

    RuleExtraction out;
    double max_alpha = 0.0;
    for (const auto& [b, alpha] : merged) {
        out.total_alpha += alpha;
        if (b.empty())
            out.empty_body_alpha = alpha;
        else
            max_alpha = std::max(max_alpha, alpha);
    }
    for (const auto& [b, alpha] : merged) {
        if (b.empty() || alpha == 0.0) continue;
        ScoredRule r;
        r.pattern.body = b;
        r.pattern.head = head;
        r.confidence = alpha;
        r.normalized = max_alpha > 0.0 ? alpha / max_alpha : 0.0;
        out.rules.push_back(std::move(r));
    }
    std::sort(out.rules.begin(), out.rules.end(), [](const ScoredRule& a, const ScoredRule& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return a.pattern.body < b.pattern.body;
    });
    if (static_cast<std::int64_t>(out.rules.size()) > top_n)
        out.rules.resize(static_cast<std::size_t>(top_n));
    return out;
}

std::string rule_report_tsv(const std::vector<ScoredRule>& rules, const Vocabulary& vocab) {
    std::ostringstream out;
    out.precision(6);
    out << "head\tbody\tconfidence\tnormalized\n";
    for (const ScoredRule& r : rules) {
        if (r.normalized < kRuleReportFloor) continue;
        out << vocab.relation_name(r.pattern.head) << '\t';
        for (std::size_t i = 0; i < r.pattern.body.size(); ++i) {
            if (i) out << " \u2227 ";
            out << vocab.relation_name(r.pattern.body[i]);
        }
        out << '\t' << r.confidence << '\t' << r.normalized << '\n';
    }
    return out.str();
}

}  // namespace kgr
