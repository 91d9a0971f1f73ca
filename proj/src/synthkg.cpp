#include "kgr/synthkg.hpp"

#include <filesystem>
#include <fstream>

#include "kgr/neuralnets.hpp"

namespace kgr {

namespace {

struct Person {
    std::int64_t id = -1;
    bool male = false;
    std::int64_t mother = -1;
    std::int64_t father = -1;
    std::int64_t spouse = -1;
};

struct TreeBuilder {
    std::vector<Person> people;
    std::vector<std::string> names;
    std::vector<std::array<std::string, 3>> triples;
    Rng rng;

    explicit TreeBuilder(std::uint64_t seed) : rng(seed) {}

    std::int64_t add_person(std::int64_t family, std::int64_t gen, bool male) {
        Person p;
        p.id = static_cast<std::int64_t>(people.size());
        p.male = male;
        people.push_back(p);
        names.push_back("f" + std::to_string(family) + "_g" + std::to_string(gen) + "_p" +
                        std::to_string(p.id) + (male ? "m" : "w"));
        return p.id;
    }

    void emit(std::int64_t s, const char* rel, std::int64_t o) {
        triples.push_back({names[static_cast<std::size_t>(s)], rel,
                           names[static_cast<std::size_t>(o)]});
    }
};

}  // namespace

SplitDataset generate_family_dataset(const FamilyGenConfig& cfg) {
    contract(cfg.n_families >= 1 && cfg.generations >= 2 && cfg.max_children >= 1,
             "family generator: bad config");
    TreeBuilder tb(cfg.seed);

    for (std::int64_t fam = 0; fam < cfg.n_families; ++fam) {
        // children[g] = people born into generation g of this family.
        std::vector<std::vector<std::int64_t>> born(static_cast<std::size_t>(cfg.generations));
        const std::int64_t f0 = tb.add_person(fam, 0, true);
        const std::int64_t m0 = tb.add_person(fam, 0, false);
        tb.people[static_cast<std::size_t>(f0)].spouse = m0;
        tb.people[static_cast<std::size_t>(m0)].spouse = f0;

        std::vector<std::pair<std::int64_t, std::int64_t>> couples = {{f0, m0}};
        for (std::int64_t gen = 1; gen < cfg.generations; ++gen) {
            std::vector<std::pair<std::int64_t, std::int64_t>> next_couples;
            for (auto [father, mother] : couples) {
                const std::int64_t n_children =
                    1 + static_cast<std::int64_t>(tb.rng.next_u64() %
                                                  static_cast<std::uint64_t>(cfg.max_children));
                for (std::int64_t c = 0; c < n_children; ++c) {
                    const bool male = tb.rng.next_u64() % 2 == 0;
                    const std::int64_t child = tb.add_person(fam, gen, male);
                    tb.people[static_cast<std::size_t>(child)].father = father;
                    tb.people[static_cast<std::size_t>(child)].mother = mother;
                    born[static_cast<std::size_t>(gen)].push_back(child);
                    // Roughly half of the non-final generation marries in.
                    if (gen + 1 < cfg.generations && tb.rng.next_u64() % 2 == 0) {
                        const std::int64_t spouse = tb.add_person(fam, gen, !male);
                        tb.people[static_cast<std::size_t>(child)].spouse = spouse;
                        tb.people[static_cast<std::size_t>(spouse)].spouse = child;
                        next_couples.emplace_back(male ? child : spouse, male ? spouse : child);
                    }
                }
            }
            couples = std::move(next_couples);
        }

        // Kinship edges per person.
        for (const Person& p : tb.people) {
            if (p.id < f0) continue;  // previous families already done
            if (p.spouse >= 0) tb.emit(p.id, p.male ? "husbandOf" : "wifeOf", p.spouse);
            if (p.father >= 0) {
                tb.emit(p.father, "fatherOf", p.id);
                tb.emit(p.mother, "motherOf", p.id);
                tb.emit(p.id, p.male ? "sonOf" : "daughterOf", p.father);
                tb.emit(p.id, p.male ? "sonOf" : "daughterOf", p.mother);
            }
        }
        // Siblings share both parents; uncles/aunts are parents' siblings.
        auto siblings_of = [&](std::int64_t id) {
            std::vector<std::int64_t> out;
            const Person& p = tb.people[static_cast<std::size_t>(id)];
            if (p.father < 0) return out;
            for (const auto& gen : born)
                for (std::int64_t other : gen)
                    if (other != id && tb.people[static_cast<std::size_t>(other)].father == p.father &&
                        tb.people[static_cast<std::size_t>(other)].mother == p.mother)
                        out.push_back(other);
            return out;
        };
        for (const auto& gen : born)
            for (std::int64_t id : gen) {
                const Person& p = tb.people[static_cast<std::size_t>(id)];
                for (std::int64_t sib : siblings_of(id))
                    tb.emit(id, p.male ? "brotherOf" : "sisterOf", sib);
                for (std::int64_t parent : {p.father, p.mother})
                    for (std::int64_t ps : siblings_of(parent)) {
                        tb.emit(ps, tb.people[static_cast<std::size_t>(ps)].male ? "uncleOf" : "auntOf",
                                id);
                        tb.emit(id, p.male ? "nephewOf" : "nieceOf", ps);
                    }
            }
    }

    // 6:2:1:1 split of the shuffled triple list.
    const std::int64_t n = static_cast<std::int64_t>(tb.triples.size());
    std::vector<std::int64_t> perm = tb.rng.permutation(n);
    const std::int64_t n_facts = n * 6 / 10;
    const std::int64_t n_train = n * 2 / 10;
    const std::int64_t n_valid = n / 10;

    SplitDataset ds;
    auto intern = [&](const std::array<std::string, 3>& t) {
        return Triple{ds.vocab.intern_entity(t[0]), ds.vocab.intern_relation(t[1]),
                      ds.vocab.intern_entity(t[2])};
    };
    for (std::int64_t i = 0; i < n; ++i) {
        const auto& t = tb.triples[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
        if (i < n_facts)
            ds.facts.push_back(intern(t));
        else if (i < n_facts + n_train)
            ds.train.push_back(intern(t));
        else if (i < n_facts + n_train + n_valid)
            ds.valid.push_back(intern(t));
        else
            ds.test.push_back(intern(t));
    }
    if (cfg.inverse) ds.vocab.enable_inverses();
    return ds;
}

void write_family_dataset(const FamilyGenConfig& cfg, const std::string& dir) {
    FamilyGenConfig plain = cfg;
    plain.inverse = false;  // files never carry inverse relations
    save_dataset(generate_family_dataset(plain), dir);
}

void write_random_dataset(const RandomGenConfig& cfg, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    Rng rng(cfg.seed);
    auto entity = [&](std::uint64_t i) { return "e" + std::to_string(i); };
    std::int64_t ring = 0;  // leading facts cover every entity and relation once
    auto dump = [&](const std::string& name, std::int64_t count) {
        std::ofstream out(dir + "/" + name, std::ios::binary);
        if (!out) throw IoError("cannot write " + dir + "/" + name);
        for (std::int64_t i = 0; i < count; ++i) {
            std::uint64_t h, r, t;
            if (name == "facts.txt" && ring < cfg.n_entities) {
                h = static_cast<std::uint64_t>(ring);
                r = static_cast<std::uint64_t>(ring % cfg.n_relations);
                t = static_cast<std::uint64_t>((ring + 1) % cfg.n_entities);
                ++ring;
            } else {
                h = rng.next_u64() % static_cast<std::uint64_t>(cfg.n_entities);
                r = rng.next_u64() % static_cast<std::uint64_t>(cfg.n_relations);
                t = rng.next_u64() % static_cast<std::uint64_t>(cfg.n_entities);
            }
            out << entity(h) << '\t' << "r" << r << '\t' << entity(t) << '\n';
        }
    };
    dump("facts.txt", cfg.n_facts);
    dump("train.txt", cfg.n_train);
    dump("valid.txt", cfg.n_valid);
    dump("test.txt", cfg.n_test);
}

}  // namespace kgr
