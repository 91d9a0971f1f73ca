#include "kgr/saturation.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "kgr/parallel.hpp"

namespace kgr {

namespace {

struct PatternAcc {
    std::int64_t hit_triples = 0;  // triples with >= 1 path of this pattern
    double delta_sum = 0.0;        // sum over triples of count / total
};

using PatternCounts = std::map<std::vector<RelationId>, std::uint64_t>;

bool in_universe(std::int64_t len, const SaturationOptions& opt) {
    if (len >= 2 && len <= opt.max_len) return true;
    return opt.include_len1 && len == 1;
}

// Sparse path-count state: (entity, walk count) pairs plus a dense scratch
// reused across triples so no per-node allocation happens.
struct SparseState {
    std::vector<std::pair<EntityId, std::uint64_t>> items;
};

struct CountScratch {
    std::vector<std::uint64_t> dense;
    std::vector<EntityId> touched;
    std::vector<SparseState> depth_state;  // one per DFS depth

    explicit CountScratch(std::int64_t n, std::int64_t max_depth)
        : dense(static_cast<std::size_t>(n), 0), depth_state(static_cast<std::size_t>(max_depth) + 1) {}
};

// Counts, for one triple (h, q, t), the paths of every universe pattern from
// h to t with the edge (h, q, t) itself removed. Shares prefix states across
// patterns with a common prefix.
void pattern_counts_for_triple(const Triple& tri, const OperatorSet& ops, std::int64_t n_base,
                               const SaturationOptions& opt, CountScratch& scratch,
                               PatternCounts& out) {
    std::vector<RelationId> prefix;
    SparseState& root = scratch.depth_state[0];
    root.items.assign(1, {tri.head, 1});

    auto dfs = [&](auto&& self, std::int64_t depth) -> void {
        const SparseState& cur = scratch.depth_state[static_cast<std::size_t>(depth)];
        const std::int64_t len = static_cast<std::int64_t>(prefix.size());
        if (len > 0 && in_universe(len, opt)) {
            for (const auto& [e, c] : cur.items)
                if (e == tri.tail) {
                    out[prefix] += c;
                    break;
                }
        }
        if (len == opt.max_len) return;
        for (RelationId r = 0; r < static_cast<RelationId>(n_base); ++r) {
            const SparseOperator& op = ops.relation(r);
            scratch.touched.clear();
            for (const auto& [e, c] : cur.items) {
                for (std::int64_t p = op.row_ptr[static_cast<std::size_t>(e)];
                     p < op.row_ptr[static_cast<std::size_t>(e) + 1]; ++p) {
                    const EntityId j = op.cols[static_cast<std::size_t>(p)];
                    if (r == tri.rel && e == tri.head && j == tri.tail) continue;
                    if (scratch.dense[static_cast<std::size_t>(j)] == 0)
                        scratch.touched.push_back(j);
                    scratch.dense[static_cast<std::size_t>(j)] += c;
                }
            }
            if (scratch.touched.empty()) continue;
            SparseState& next = scratch.depth_state[static_cast<std::size_t>(depth) + 1];
            next.items.clear();
            for (EntityId j : scratch.touched) {
                next.items.emplace_back(j, scratch.dense[static_cast<std::size_t>(j)]);
                scratch.dense[static_cast<std::size_t>(j)] = 0;
            }
            prefix.push_back(r);
            self(self, depth + 1);
            prefix.pop_back();
        }
    };
    dfs(dfs, 0);
}

std::vector<Triple> subgraph_triples(const std::vector<Triple>& g, RelationId q) {
    std::set<Triple> uniq;
    for (const Triple& t : g)
        if (t.rel == q) uniq.insert(t);
    return {uniq.begin(), uniq.end()};
}

// Per-pattern accumulators over all triples of G(q), merged deterministically.
std::map<std::vector<RelationId>, PatternAcc> accumulate_query(
    const std::vector<Triple>& gq, const OperatorSet& ops, std::int64_t n_base,
    const SaturationOptions& opt) {
    std::vector<std::map<std::vector<RelationId>, PatternAcc>> chunks(
        static_cast<std::size_t>(kParallelChunks));
    parallel_indexed_chunks(
        static_cast<std::int64_t>(gq.size()), [&](int chunk, std::int64_t b, std::int64_t e) {
            auto& acc = chunks[static_cast<std::size_t>(chunk)];
            PatternCounts counts;
            CountScratch scratch(ops.num_entities, opt.max_len);
            for (std::int64_t i = b; i < e; ++i) {
                counts.clear();
                pattern_counts_for_triple(gq[static_cast<std::size_t>(i)], ops, n_base, opt, scratch,
                                          counts);
                double total = 0.0;
                for (const auto& [pat, c] : counts) total += static_cast<double>(c);
                if (total == 0.0) continue;  // zero-path triples contribute 0
                for (const auto& [pat, c] : counts) {
                    PatternAcc& pa = acc[pat];
                    ++pa.hit_triples;
                    pa.delta_sum += static_cast<double>(c) / total;
                }
            }
        });
    std::map<std::vector<RelationId>, PatternAcc> merged;
    for (const auto& chunk : chunks)
        for (const auto& [pat, pa] : chunk) {
            PatternAcc& m = merged[pat];
            m.hit_triples += pa.hit_triples;
            m.delta_sum += pa.delta_sum;
        }
    return merged;
}

}  // namespace

double macro_saturation(std::span<const RelationId> pattern, RelationId q,
                        const std::vector<Triple>& g, const Vocabulary& vocab,
                        const SaturationOptions& opt) {
    contract(!pattern.empty(), "macro_saturation: empty pattern");
    const OperatorSet ops = build_operators(g, vocab);
    const std::vector<Triple> gq = subgraph_triples(g, q);
    contract(!gq.empty(), "macro_saturation: relation has no triples (undefined)");
    (void)opt;
    std::int64_t hits = 0;
    for (const Triple& tri : gq) {
        const ExcludedEdge excl{q, tri.head, tri.tail};
        if (count_paths(tri.head, tri.tail, pattern, ops, {&excl, 1}) > 0) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(gq.size());
}

double micro_saturation(std::span<const RelationId> pattern, RelationId q,
                        const std::vector<Triple>& g, const Vocabulary& vocab,
                        const SaturationOptions& opt) {
    contract(!pattern.empty(), "micro_saturation: empty pattern");
    contract(in_universe(static_cast<std::int64_t>(pattern.size()), opt),
             "micro_saturation: pattern outside the universe for this L");
    const OperatorSet ops = build_operators(g, vocab);
    const std::vector<Triple> gq = subgraph_triples(g, q);
    contract(!gq.empty(), "micro_saturation: relation has no triples (undefined)");
    const std::vector<RelationId> key(pattern.begin(), pattern.end());
    double sum = 0.0;
    PatternCounts counts;
    CountScratch scratch(ops.num_entities, opt.max_len);
    for (const Triple& tri : gq) {
        counts.clear();
        pattern_counts_for_triple(tri, ops, vocab.num_base_relations(), opt, scratch, counts);
        double total = 0.0;
        for (const auto& [pat, c] : counts) total += static_cast<double>(c);
        if (total == 0.0) continue;
        auto it = counts.find(key);
        if (it != counts.end()) sum += static_cast<double>(it->second) / total;
    }
    return sum / static_cast<double>(gq.size());
}

std::vector<SaturationRecord> saturation_report(const std::vector<Triple>& g,
                                                const Vocabulary& vocab,
                                                std::span<const RelationId> queries,
                                                const SaturationOptions& opt) {
    const OperatorSet ops = build_operators(g, vocab);
    std::vector<SaturationRecord> out;
    for (RelationId q : queries) {
        const std::vector<Triple> gq = subgraph_triples(g, q);
        if (gq.empty()) continue;
        const double nq = static_cast<double>(gq.size());
        auto acc = accumulate_query(gq, ops, vocab.num_base_relations(), opt);
        std::vector<SaturationRecord> block;
        for (const auto& [pat, pa] : acc) {
            SaturationRecord rec;
            rec.head = q;
            rec.pattern = pat;
            rec.gamma = static_cast<double>(pa.hit_triples) / nq;
            rec.delta = pa.delta_sum / nq;
            rec.eta = rec.gamma * rec.delta;
            if (rec.gamma > 0.0) block.push_back(std::move(rec));
        }
        std::sort(block.begin(), block.end(), [](const SaturationRecord& a, const SaturationRecord& b) {
            if (a.eta != b.eta) return a.eta > b.eta;
            if (a.gamma != b.gamma) return a.gamma > b.gamma;
            return a.pattern < b.pattern;
        });
        if (opt.top_n >= 0 && static_cast<std::int64_t>(block.size()) > opt.top_n)
            block.resize(static_cast<std::size_t>(opt.top_n));
        out.insert(out.end(), block.begin(), block.end());
    }
    return out;
}

std::string saturation_report_tsv(std::span<const SaturationRecord> records,
                                  const Vocabulary& vocab) {
    std::ostringstream out;
    out.precision(6);
    out << "head\tpattern\tgamma\tdelta\teta\n";
    for (const SaturationRecord& r : records) {
        out << vocab.relation_name(r.head) << '\t';
        for (std::size_t i = 0; i < r.pattern.size(); ++i) {
            if (i) out << " \u2227 ";
            out << vocab.relation_name(r.pattern[i]);
        }
        out << '\t' << r.gamma << '\t' << r.delta << '\t' << r.eta << '\n';
    }
    return out.str();
}

}  // namespace kgr
