// kgr-genkg: deterministic synthetic datasets in the kgr TSV layout.

#include <CLI11.hpp>
#include <iostream>

#include "kgr/synthkg.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic knowledge-graph generator"};
    app.require_subcommand(1);

    kgr::FamilyGenConfig fam;
    std::string fam_out;
    CLI::App* family = app.add_subcommand("family", "multi-generation kinship trees");
    family->add_option("--out", fam_out, "output directory")->required();
    family->add_option("--families", fam.n_families, "number of independent families");
    family->add_option("--generations", fam.generations, "generations per family");
    family->add_option("--max-children", fam.max_children, "max children per couple");
    family->add_option("--seed", fam.seed, "rng seed");

    kgr::RandomGenConfig rnd;
    std::string rnd_out;
    CLI::App* random = app.add_subcommand("random", "uniform random triples (loader stress)");
    random->add_option("--out", rnd_out, "output directory")->required();
    random->add_option("--entities", rnd.n_entities, "entity count");
    random->add_option("--relations", rnd.n_relations, "relation count");
    random->add_option("--facts", rnd.n_facts, "facts split size");
    random->add_option("--train", rnd.n_train, "train split size");
    random->add_option("--valid", rnd.n_valid, "valid split size");
    random->add_option("--test", rnd.n_test, "test split size");
    random->add_option("--seed", rnd.seed, "rng seed");

    CLI11_PARSE(app, argc, argv);
    try {
        if (app.got_subcommand(family)) {
            kgr::write_family_dataset(fam, fam_out);
            std::cerr << "wrote family dataset to " << fam_out << "\n";
        } else {
            kgr::write_random_dataset(rnd, rnd_out);
            std::cerr << "wrote random dataset to " << rnd_out << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
