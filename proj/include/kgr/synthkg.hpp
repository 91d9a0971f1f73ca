#pragma once
// Deterministic synthetic knowledge graphs for tests and demos.
//
// The family generator builds multi-generation trees over the twelve kinship
// relations (brother/sister, father/mother, son/daughter, husband/wife,
// uncle/aunt, nephew/niece) with gender-consistent edges, then splits the
// triples 6:2:1:1 into facts/train/valid/test.

#include <cstdint>
#include <string>

#include "kgr/kgdata.hpp"

namespace kgr {

struct FamilyGenConfig {
    std::int64_t n_families = 30;
    std::int64_t generations = 3;
    std::int64_t max_children = 4;  // per couple, min 1
    std::uint64_t seed = 7;
    bool inverse = false;  // whether the returned vocabulary enables inverses
};

SplitDataset generate_family_dataset(const FamilyGenConfig& cfg);
void write_family_dataset(const FamilyGenConfig& cfg, const std::string& dir);

// Uniform random triples at a given scale; for loader stress only.
struct RandomGenConfig {
    std::int64_t n_entities = 14541;
    std::int64_t n_relations = 237;
    std::int64_t n_facts = 204087;
    std::int64_t n_train = 68028;
    std::int64_t n_valid = 17535;
    std::int64_t n_test = 20466;
    std::uint64_t seed = 11;
};
void write_random_dataset(const RandomGenConfig& cfg, const std::string& dir);

}  // namespace kgr
