#include "kgr/evalrank.hpp"

#include <algorithm>

#include "kgr/parallel.hpp"

namespace kgr {

KnownFilter::KnownFilter(const SplitDataset& data) {
    const bool inv = data.vocab.inverse_enabled();
    const RelationId base = static_cast<RelationId>(data.vocab.num_base_relations());
    auto add_split = [&](const std::vector<Triple>& split) {
        for (const Triple& t : split) {
            map_[key(t.head, t.rel)].push_back(t.tail);
            if (inv) map_[key(t.tail, t.rel + base)].push_back(t.head);
        }
    };
    add_split(data.facts);
    add_split(data.train);
    add_split(data.valid);
    add_split(data.test);
    for (auto& [k, v] : map_) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
}

std::span<const EntityId> KnownFilter::known(EntityId head, RelationId rel) const {
    auto it = map_.find(key(head, rel));
    if (it == map_.end()) return {};
    return it->second;
}

double filtered_rank(std::span<const double> s, EntityId gold, std::span<const EntityId> known) {
    contract(gold >= 0 && static_cast<std::size_t>(gold) < s.size(), "filtered_rank: gold out of range");
    const double sg = s[static_cast<std::size_t>(gold)];
    std::vector<char> filtered(s.size(), 0);
    for (EntityId e : known)
        if (e >= 0 && static_cast<std::size_t>(e) < s.size()) filtered[static_cast<std::size_t>(e)] = 1;
    std::int64_t better = 0, equal = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (static_cast<EntityId>(i) == gold || filtered[i]) continue;
        if (s[i] > sg)
            ++better;
        else if (s[i] == sg)
            ++equal;
    }
    return 1.0 + static_cast<double>(better) + static_cast<double>(equal) / 2.0;
}

Metrics metrics_from_ranks(std::span<const double> ranks) {
    Metrics m;
    m.n_queries = static_cast<std::int64_t>(ranks.size());
    if (ranks.empty()) return m;
    for (double r : ranks) {
        m.mrr += 1.0 / r;
        m.hit1 += (r <= 1.0) ? 1.0 : 0.0;
        m.hit3 += (r <= 3.0) ? 1.0 : 0.0;
        m.hit10 += (r <= 10.0) ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(ranks.size());
    m.mrr /= n;
    m.hit1 /= n;
    m.hit3 /= n;
    m.hit10 /= n;
    return m;
}

Metrics evaluate_queries(std::span<const Query> queries,
                         const std::function<std::vector<double>(const Query&)>& score,
                         const KnownFilter& filter) {
    std::vector<double> ranks(queries.size(), 0.0);
    parallel_chunks(static_cast<std::int64_t>(queries.size()), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) {
            const Query& q = queries[static_cast<std::size_t>(i)];
            const std::vector<double> s = score(q);
            ranks[static_cast<std::size_t>(i)] =
                filtered_rank(s, q.tail, filter.known(q.head, q.rel));
        }
    });
    return metrics_from_ranks(ranks);
}

Metrics evaluate(const SplitDataset& data, const DegreEmbedModel& model, const OperatorSet& ops,
                 std::span<const Triple> split) {
    const std::vector<Query> queries = augmented_queries(split, data.vocab);
    if (queries.empty()) return {};
    KnownFilter filter(data);

    OperatorSet scored_ops = ops;
    if (model.hp().degree_embedding) {
        auto dm = model.degree_matrices();
        scored_ops = build_degre_operators(ops, model.signatures().entity_signature,
                                           dm.rho_by_signature);
    }
    const std::vector<AttentionTensor> attn = model.attention_for_all();

    return evaluate_queries(
        queries,
        [&](const Query& q) {
            return model.score_query(q.head, attn[static_cast<std::size_t>(q.rel)], scored_ops,
                                     model.exclusion_for(q, data.vocab));
        },
        filter);
}

}  // namespace kgr
