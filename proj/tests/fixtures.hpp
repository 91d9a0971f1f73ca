#pragma once
// Shared test fixtures: the worked-example family KG, small random graphs,
// and helpers for temp dataset directories.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kgr/kgdata.hpp"
#include "kgr/neuralnets.hpp"

namespace kgrtest {

// Seven-person family KG used throughout the worked examples:
//   entities x1 x2 z1 z2 z3 z4 z5 (ids 0..6)
//   auntOf:   x1->z1, x1->z4, x2->z1
//   sisterOf: x1->z3, x2->z3, x1->z5
//   fatherOf: z3->z1, z3->z4
//   motherOf: z5->z4
//   wifeOf:   x2->z2
//   uncleOf:  z2->z1
// Gives M_auntOf rows {x1: z1 z4, x2: z1}, the chain
// v_x1 * M_sisterOf * M_fatherOf = [0,0,1,0,0,1,0], and saturations
// gamma = 1, delta = 2/3 for [sisterOf, fatherOf] => auntOf.
struct FamilyExample {
    kgr::SplitDataset ds;
    kgr::EntityId x1, x2, z1, z2, z3, z4, z5;
    kgr::RelationId auntOf, sisterOf, fatherOf, motherOf, wifeOf, uncleOf;
};

inline FamilyExample family_example(bool inverse = false) {
    FamilyExample f;
    auto& v = f.ds.vocab;
    f.x1 = v.intern_entity("x1");
    f.x2 = v.intern_entity("x2");
    f.z1 = v.intern_entity("z1");
    f.z2 = v.intern_entity("z2");
    f.z3 = v.intern_entity("z3");
    f.z4 = v.intern_entity("z4");
    f.z5 = v.intern_entity("z5");
    f.auntOf = v.intern_relation("auntOf");
    f.sisterOf = v.intern_relation("sisterOf");
    f.fatherOf = v.intern_relation("fatherOf");
    f.motherOf = v.intern_relation("motherOf");
    f.wifeOf = v.intern_relation("wifeOf");
    f.uncleOf = v.intern_relation("uncleOf");
    f.ds.facts = {
        {f.x1, f.auntOf, f.z1},   {f.x1, f.auntOf, f.z4},   {f.x2, f.auntOf, f.z1},
        {f.x1, f.sisterOf, f.z3}, {f.x2, f.sisterOf, f.z3}, {f.x1, f.sisterOf, f.z5},
        {f.z3, f.fatherOf, f.z1}, {f.z3, f.fatherOf, f.z4}, {f.z5, f.motherOf, f.z4},
        {f.x2, f.wifeOf, f.z2},   {f.z2, f.uncleOf, f.z1},
    };
    if (inverse) v.enable_inverses();
    return f;
}

// Random multigraph-free KG for oracle comparisons.
inline kgr::SplitDataset random_graph(kgr::Rng& rng, std::int64_t n_entities,
                                      std::int64_t n_relations, double edge_prob,
                                      bool inverse = false) {
    kgr::SplitDataset ds;
    for (std::int64_t e = 0; e < n_entities; ++e)
        ds.vocab.intern_entity("e" + std::to_string(e));
    for (std::int64_t r = 0; r < n_relations; ++r)
        ds.vocab.intern_relation("r" + std::to_string(r));
    for (std::int64_t r = 0; r < n_relations; ++r)
        for (std::int64_t i = 0; i < n_entities; ++i)
            for (std::int64_t j = 0; j < n_entities; ++j)
                if (rng.uniform(0.0, 1.0) < edge_prob)
                    ds.facts.push_back({static_cast<kgr::EntityId>(i),
                                        static_cast<kgr::RelationId>(r),
                                        static_cast<kgr::EntityId>(j)});
    if (inverse) ds.vocab.enable_inverses();
    return ds;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = (std::filesystem::temp_directory_path() /
                 ("kgr_" + tag + "_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter_++)))
                    .string();
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::string& path() const { return path_; }

private:
    static inline int counter_ = 0;
    std::string path_;
};

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    for (const auto& l : lines) out << l << "\n";
}

}  // namespace kgrtest
