#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "kgr/degreembed.hpp"
#include "kgr/evalrank.hpp"
#include "kgr/rulemine.hpp"

using namespace kgr;
using kgrtest::TempDir;

namespace {

HyperParams small_hp(bool inverse) {
    HyperParams hp;
    hp.embed_dim = 8;
    hp.hidden_dim = 8;
    hp.rank = 2;
    hp.max_rule_length = 2;
    hp.batch_size = 16;
    hp.max_epochs = 25;
    hp.lr = 0.05;
    hp.inverse = inverse;
    hp.seed = 1234;
    // Magnitude-faithful chains: rule assertions below read confidences.
    hp.normalize_full = false;
    return hp;
}

DegreEmbedModel make_model(const SplitDataset& ds, const HyperParams& hp) {
    return DegreEmbedModel(
        ds.vocab, dedupe_degree_features(degree_features(ds.reasoning_graph(), ds.vocab)), hp);
}

// Chain KG where s(x, y) <= p(x, z) ^ q(z, y) holds by construction.
SplitDataset chain_dataset(std::int64_t n_chains, bool inverse) {
    SplitDataset ds;
    const RelationId p = ds.vocab.intern_relation("p");
    const RelationId q = ds.vocab.intern_relation("q");
    const RelationId s = ds.vocab.intern_relation("s");
    for (std::int64_t i = 0; i < n_chains; ++i) {
        const EntityId a = ds.vocab.intern_entity("a" + std::to_string(i));
        const EntityId b = ds.vocab.intern_entity("b" + std::to_string(i));
        const EntityId c = ds.vocab.intern_entity("c" + std::to_string(i));
        ds.facts.push_back({a, p, b});
        ds.facts.push_back({b, q, c});
        if (i % 4 == 2)
            ds.valid.push_back({a, s, c});
        else if (i % 4 == 3)
            ds.test.push_back({a, s, c});
        else
            ds.train.push_back({a, s, c});
    }
    if (inverse) ds.vocab.enable_inverses();
    return ds;
}

}  // namespace

TEST_CASE("trainer learns a two-hop compositional rule") {
    SplitDataset ds = chain_dataset(24, true);
    HyperParams hp = small_hp(true);
    DegreEmbedModel model = make_model(ds, hp);
    Trainer trainer(model, ds);
    TrainResult result = trainer.train();
    REQUIRE(result.epochs_trained >= 1);
    CHECK(result.best_valid_mrr > 0.8);

    Metrics test_metrics = evaluate(ds, model, trainer.operators(), ds.test);
    CHECK(test_metrics.mrr > 0.8);

    // The learned attention favors the p ^ q body for head s.
    RuleExtraction ex = extract_rules(model.attention_for(ds.vocab.relation_id("s")),
                                      ds.vocab.relation_id("s"), 5);
    REQUIRE(!ex.rules.empty());
    const std::vector<RelationId> want = {ds.vocab.relation_id("p"), ds.vocab.relation_id("q")};
    CHECK(ex.rules.front().pattern.body == want);
}

TEST_CASE("single-triple sanity: the trained model retrieves the only neighbor") {
    SplitDataset ds;
    const EntityId a = ds.vocab.intern_entity("a");
    const EntityId b = ds.vocab.intern_entity("b");
    const EntityId c = ds.vocab.intern_entity("c");
    const EntityId d = ds.vocab.intern_entity("d");
    const RelationId r = ds.vocab.intern_relation("r");
    ds.facts = {{a, r, b}, {c, r, d}};
    ds.train = {{a, r, b}};

    HyperParams hp = small_hp(false);
    DegreEmbedModel model = make_model(ds, hp);
    OperatorSet ops = build_operators(ds.reasoning_graph(), ds.vocab);

    // Run the optimizer to convergence on the single augmented query.
    Adam adam(AdamConfig{.lr = hp.lr});
    auto params = model.params();
    const std::vector<Query> batch = {{a, r, b}};
    for (int step = 0; step < 80; ++step) {
        ad::Tape tape;
        auto bound = model.bind(tape);
        auto fwd = model.loss_on_batch(tape, bound, batch, ops);
        tape.backward(fwd.loss);
        static const ad::Mat kEmpty;
        std::vector<const ad::Mat*> grads;
        for (std::size_t i = 0; i < params.size(); ++i)
            grads.push_back(tape.has_grad(bound.refs[i]) ? &tape.grad(bound.refs[i]) : &kEmpty);
        adam.step(params, grads);
    }

    // Fresh inference query (no gold-edge exclusion): b must outrank
    // everything, in particular the identity mass left at a.
    auto dm = model.degree_matrices();
    OperatorSet b_ops =
        build_degre_operators(ops, model.signatures().entity_signature, dm.rho_by_signature);
    auto scores = model.score_query(a, model.attention_for(r), b_ops, {});
    for (EntityId e = 0; e < 4; ++e)
        if (e != b) CHECK(scores[static_cast<std::size_t>(b)] > scores[static_cast<std::size_t>(e)]);
}

TEST_CASE("deterministic training: same seed, same losses, same rules") {
    SplitDataset ds = chain_dataset(16, true);
    HyperParams hp = small_hp(true);
    hp.max_epochs = 4;

    auto run = [&]() {
        DegreEmbedModel model = make_model(ds, hp);
        Trainer trainer(model, ds);
        TrainResult res = trainer.train();
        std::vector<double> losses;
        for (const auto& e : res.log) losses.push_back(e.train_loss);
        RuleExtraction ex = extract_rules(model.attention_for(0), 0, 10);
        return std::make_pair(losses, ex);
    };
    auto [l1, ex1] = run();
    auto [l2, ex2] = run();
    REQUIRE(l1.size() == l2.size());
    for (std::size_t i = 0; i < l1.size(); ++i) CHECK(l1[i] == l2[i]);
    REQUIRE(ex1.rules.size() == ex2.rules.size());
    for (std::size_t i = 0; i < ex1.rules.size(); ++i) {
        CHECK(ex1.rules[i].pattern.body == ex2.rules[i].pattern.body);
        CHECK(ex1.rules[i].confidence == ex2.rules[i].confidence);
    }
}

TEST_CASE("early stopping keeps the best-epoch parameters") {
    SplitDataset ds = chain_dataset(12, true);
    HyperParams hp = small_hp(true);
    hp.max_epochs = 8;
    DegreEmbedModel model = make_model(ds, hp);
    Trainer trainer(model, ds);
    TrainResult res = trainer.train();
    double best = 0.0;
    for (const auto& e : res.log) best = std::max(best, e.valid_mrr);
    CHECK(res.best_valid_mrr == doctest::Approx(best));
    // Restored parameters reproduce the best validation MRR.
    Metrics again = evaluate(ds, model, trainer.operators(), ds.valid);
    CHECK(again.mrr == doctest::Approx(res.best_valid_mrr).epsilon(1e-9));
}

TEST_CASE("checkpoints round-trip parameters, optimizer and rng") {
    SplitDataset ds = chain_dataset(10, true);
    HyperParams hp = small_hp(true);
    hp.max_epochs = 2;
    DegreEmbedModel model = make_model(ds, hp);
    Trainer trainer(model, ds);
    TrainResult res = trainer.train();

    TempDir dir("ckpt");
    const std::string path = dir.path() + "/model.ckpt";
    save_checkpoint(path, model, trainer.optimizer(), trainer.rng(), ds.vocab,
                    res.best_valid_mrr, res.epochs_trained);
    LoadedModel loaded = load_checkpoint(path, ds);
    CHECK(loaded.meta.best_valid_mrr == res.best_valid_mrr);
    CHECK(loaded.meta.epochs_trained == res.epochs_trained);
    CHECK(loaded.adam.step_count() == trainer.optimizer().step_count());

    auto orig = model.params();
    auto back = loaded.model.params();
    REQUIRE(orig.size() == back.size());
    for (std::size_t i = 0; i < orig.size(); ++i) {
        CHECK(back[i]->name == orig[i]->name);
        CHECK((back[i]->value - orig[i]->value).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back[i]->m - orig[i]->m).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back[i]->v - orig[i]->v).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(loaded.rng.next_u64() == trainer.rng().next_u64());
}

TEST_CASE("checkpoint refuses a mismatched vocabulary") {
    SplitDataset ds = chain_dataset(10, true);
    HyperParams hp = small_hp(true);
    hp.max_epochs = 1;
    DegreEmbedModel model = make_model(ds, hp);
    Trainer trainer(model, ds);
    trainer.train();
    TempDir dir("ckpt_mismatch");
    const std::string path = dir.path() + "/model.ckpt";
    save_checkpoint(path, model, trainer.optimizer(), trainer.rng(), ds.vocab, 0.0, 1);

    SplitDataset other = chain_dataset(11, true);
    CHECK_THROWS_AS(load_checkpoint(path, other), ContractViolation);
    CHECK_THROWS_AS(load_checkpoint(dir.path() + "/missing.ckpt", ds), IoError);
}

TEST_CASE("a diverging run aborts with a diagnostic") {
    SplitDataset ds = chain_dataset(8, true);
    HyperParams hp = small_hp(true);
    hp.lr = 1e200;  // overflow the gate products into inf - inf
    hp.max_epochs = 10;
    DegreEmbedModel model = make_model(ds, hp);
    Trainer trainer(model, ds);
    CHECK_THROWS_AS(trainer.train(), NumericFault);
}

TEST_CASE("inverse-free training answers only forward queries") {
    SplitDataset ds = chain_dataset(16, false);
    HyperParams hp = small_hp(false);
    DegreEmbedModel model = make_model(ds, hp);
    Trainer trainer(model, ds);
    TrainResult res = trainer.train();
    CHECK(res.best_valid_mrr > 0.8);
    const auto queries = augmented_queries(ds.test, ds.vocab);
    CHECK(queries.size() == ds.test.size());  // no reverse direction
}
