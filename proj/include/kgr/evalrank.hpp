#pragma once
// Filtered ranking evaluation: tie-averaged rank, MRR and Hit@k.
//
// Filtered protocol: when ranking the gold answer of q(h, ?), every other
// entity known to answer the same query anywhere in facts/train/valid/test is
// removed from the candidate pool first.

#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "kgr/degreembed.hpp"
#include "kgr/kgdata.hpp"

namespace kgr {

// (head, rel) -> all known tails, over every split, both query directions
// when inverses are enabled.
class KnownFilter {
public:
    KnownFilter() = default;
    explicit KnownFilter(const SplitDataset& data);

    std::span<const EntityId> known(EntityId head, RelationId rel) const;

private:
    static std::uint64_t key(EntityId h, RelationId r) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(h)) << 32) |
               static_cast<std::uint32_t>(r);
    }
    std::unordered_map<std::uint64_t, std::vector<EntityId>> map_;
};

struct RankResult {
    Query query;
    double rank = 0.0;  // >= 1, fractional under tie averaging
    double score_gold = 0.0;
};

// Tie-averaged filtered rank:
//   1 + #{better unfiltered candidates} + #{equal unfiltered candidates} / 2.
// `known` lists entities to filter out (gold excluded implicitly).
double filtered_rank(std::span<const double> s, EntityId gold, std::span<const EntityId> known);

struct Metrics {
    double mrr = 0.0;
    double hit1 = 0.0;
    double hit3 = 0.0;
    double hit10 = 0.0;
    std::int64_t n_queries = 0;
};

Metrics metrics_from_ranks(std::span<const double> ranks);

// Scores every query with `score` (parallel, deterministic aggregation) and
// reduces the filtered ranks to MRR / Hit@k.
Metrics evaluate_queries(std::span<const Query> queries,
                         const std::function<std::vector<double>(const Query&)>& score,
                         const KnownFilter& filter);

// Full protocol for a trained model: inverse-augmented test queries, gold
// edge removed from the operators per query.
Metrics evaluate(const SplitDataset& data, const DegreEmbedModel& model, const OperatorSet& ops,
                 std::span<const Triple> split);

}  // namespace kgr
