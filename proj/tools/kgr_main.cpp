// kgr: train / eval / rules / saturation / export-emb over TSV triple datasets.
//
// Exit codes: 0 ok, 1 config or usage error, 2 bad data directory,
// 3 checkpoint problem. Diagnostics go to stderr; `eval` prints exactly one
// JSON document on stdout.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "kgr/degreembed.hpp"
#include "kgr/evalrank.hpp"
#include "kgr/kgdata.hpp"
#include "kgr/parallel.hpp"
#include "kgr/rulemine.hpp"
#include "kgr/saturation.hpp"

namespace {

using namespace kgr;

struct RunConfig {
    HyperParams hp;
    std::string data_dir;
    std::string out_dir = ".";
    std::string ckpt_path;
    int threads = 0;
    std::int64_t top_n = 20;
    std::int64_t sat_len = 2;
    bool sat_len1 = false;
};

// 6 significant digits, round-tripped so reports are diffable.
std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    static const std::set<std::string> known = {
        "data",     "out",     "ckpt",    "seed",      "threads",   "inverse",
        "L",        "T",       "lr",      "batch",     "epochs",    "patience",
        "m",        "hidden",  "clamp_eps", "degree_embedding", "normalize",
        "normalize_full",
        "top",      "sat_L",   "sat_len1"};
    std::map<std::string, std::string> kv;
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        if (!known.count(key))
            throw ParseError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ParseError("not a boolean: " + v);
}

void apply_config_file(RunConfig& rc, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) {
        if (k == "data") rc.data_dir = v;
        else if (k == "out") rc.out_dir = v;
        else if (k == "ckpt") rc.ckpt_path = v;
        else if (k == "seed") rc.hp.seed = std::stoull(v);
        else if (k == "threads") rc.threads = std::stoi(v);
        else if (k == "inverse") rc.hp.inverse = parse_bool(v);
        else if (k == "L") rc.hp.max_rule_length = std::stoll(v);
        else if (k == "T") rc.hp.rank = std::stoll(v);
        else if (k == "lr") rc.hp.lr = std::stod(v);
        else if (k == "batch") rc.hp.batch_size = std::stoll(v);
        else if (k == "epochs") rc.hp.max_epochs = std::stoll(v);
        else if (k == "patience") rc.hp.patience = std::stoll(v);
        else if (k == "m") rc.hp.embed_dim = std::stoll(v);
        else if (k == "hidden") rc.hp.hidden_dim = std::stoll(v);
        else if (k == "clamp_eps") rc.hp.clamp_eps = std::stod(v);
        else if (k == "degree_embedding") rc.hp.degree_embedding = parse_bool(v);
        else if (k == "normalize") rc.hp.normalize_states = parse_bool(v);
        else if (k == "normalize_full") rc.hp.normalize_full = parse_bool(v);
        else if (k == "top") rc.top_n = std::stoll(v);
        else if (k == "sat_L") rc.sat_len = std::stoll(v);
        else if (k == "sat_len1") rc.sat_len1 = parse_bool(v);
    }
}

void add_common_options(CLI::App* cmd, RunConfig& rc, std::string& config_path) {
    // Repeated flags are fine; the last occurrence wins.
    cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--config", config_path, "key=value config file (flags override)");
    cmd->add_option("--data", rc.data_dir, "dataset directory with {facts,train,valid,test}.txt");
    cmd->add_option("--out", rc.out_dir, "output directory");
    cmd->add_option("--ckpt", rc.ckpt_path, "checkpoint file");
    cmd->add_option("--seed", rc.hp.seed, "rng seed");
    cmd->add_option("--threads", rc.threads, "worker threads (0 = auto, KGR_THREADS honored)");
    cmd->add_option("--inverse", rc.hp.inverse, "learn inverse relations and reverse queries");
    cmd->add_option("--L", rc.hp.max_rule_length, "max rule length");
    cmd->add_option("--T", rc.hp.rank, "approximation rank");
    cmd->add_option("--lr", rc.hp.lr, "learning rate");
    cmd->add_option("--batch", rc.hp.batch_size, "batch size");
    cmd->add_option("--epochs", rc.hp.max_epochs, "max training epochs");
    cmd->add_option("--patience", rc.hp.patience, "early stopping patience");
    cmd->add_option("--m", rc.hp.embed_dim, "embedding dimension");
    cmd->add_option("--hidden", rc.hp.hidden_dim, "BiLSTM hidden dimension");
    cmd->add_option("--clamp-eps", rc.hp.clamp_eps, "loss clamp epsilon");
    cmd->add_option("--degree-embedding", rc.hp.degree_embedding,
                    "weight operators by degree attention (off = plain TensorLog)");
    cmd->add_option("--normalize", rc.hp.normalize_states, "L1-normalize states after each hop");
    cmd->add_option("--normalize-full", rc.hp.normalize_full,
                    "full u/||u|| form instead of the unit cap");
    cmd->add_option("--top", rc.top_n, "rules per head in reports");
    cmd->add_option("--sat-L", rc.sat_len, "saturation max pattern length");
    cmd->add_option("--sat-len1", rc.sat_len1, "include length-1 patterns in the universe");
}

SplitDataset load_data(const RunConfig& rc) {
    if (rc.data_dir.empty() || !std::filesystem::is_directory(rc.data_dir))
        throw IoError("dataset directory not found: " + rc.data_dir);
    return load_dataset(rc.data_dir, rc.hp.inverse);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << content;
}

int cmd_train(const RunConfig& rc) {
    SplitDataset data = load_data(rc);
    DegreEmbedModel model(data.vocab,
                          dedupe_degree_features(degree_features(data.reasoning_graph(), data.vocab)),
                          rc.hp);
    Trainer trainer(model, data);
    std::filesystem::create_directories(rc.out_dir);
    const std::string log_path = rc.out_dir + "/train.log.jsonl";
    std::ofstream log(log_path, std::ios::binary);
    if (!log) throw IoError("cannot write " + log_path);
    TrainResult result = trainer.train([&](const EpochLog& e) {
        log << "{\"epoch\":" << e.epoch << ",\"train_loss\":" << fmt6(e.train_loss)
            << ",\"valid_mrr\":" << fmt6(e.valid_mrr) << ",\"elapsed_s\":" << e.elapsed_s
            << ",\"skipped_batches\":" << e.skipped_batches << "}\n";
        log.flush();
        std::cerr << "epoch " << e.epoch << " loss " << fmt6(e.train_loss) << " valid_mrr "
                  << fmt6(e.valid_mrr) << " (" << fmt6(e.elapsed_s) << "s)\n";
    });
    const std::string ckpt = rc.ckpt_path.empty() ? rc.out_dir + "/model.ckpt" : rc.ckpt_path;
    save_checkpoint(ckpt, model, trainer.optimizer(), trainer.rng(), data.vocab,
                    result.best_valid_mrr, result.epochs_trained);
    std::cerr << "saved " << ckpt << " (best valid MRR " << fmt6(result.best_valid_mrr) << ", "
              << result.epochs_trained << " epochs)\n";
    return 0;
}

int cmd_eval(const RunConfig& rc) {
    SplitDataset data = load_data(rc);
    LoadedModel loaded = load_checkpoint(rc.ckpt_path, data);
    OperatorSet ops = build_operators(data.reasoning_graph(), data.vocab);
    Metrics m = evaluate(data, loaded.model, ops, data.test);
    std::string json = "{\"dataset\":\"" + rc.data_dir + "\",\"checkpoint\":\"" + rc.ckpt_path +
                       "\",\"mrr\":" + fmt6(m.mrr) + ",\"hit1\":" + fmt6(m.hit1) +
                       ",\"hit3\":" + fmt6(m.hit3) + ",\"hit10\":" + fmt6(m.hit10) +
                       ",\"n_queries\":" + std::to_string(m.n_queries) + "}";
    std::cout << json << "\n";
    std::filesystem::create_directories(rc.out_dir);
    write_file(rc.out_dir + "/metrics.json", json + "\n");
    return 0;
}

int cmd_rules(const RunConfig& rc) {
    SplitDataset data = load_data(rc);
    LoadedModel loaded = load_checkpoint(rc.ckpt_path, data);
    std::vector<ScoredRule> all;
    for (RelationId q = 0; q < static_cast<RelationId>(data.vocab.num_base_relations()); ++q) {
        RuleExtraction ex = extract_rules(loaded.model.attention_for(q), q, rc.top_n);
        all.insert(all.end(), ex.rules.begin(), ex.rules.end());
    }
    std::filesystem::create_directories(rc.out_dir);
    write_file(rc.out_dir + "/rules.tsv", rule_report_tsv(all, data.vocab));
    std::cerr << "wrote " << rc.out_dir << "/rules.tsv\n";
    return 0;
}

int cmd_saturation(const RunConfig& rc) {
    SplitDataset data = load_data(rc);
    std::vector<RelationId> heads(static_cast<std::size_t>(data.vocab.num_base_relations()));
    for (std::size_t i = 0; i < heads.size(); ++i) heads[i] = static_cast<RelationId>(i);
    SaturationOptions opt;
    opt.max_len = rc.sat_len;
    opt.include_len1 = rc.sat_len1;
    opt.top_n = rc.top_n;
    auto records = saturation_report(data.reasoning_graph(), data.vocab, heads, opt);
    std::filesystem::create_directories(rc.out_dir);
    write_file(rc.out_dir + "/saturation.tsv", saturation_report_tsv(records, data.vocab));
    std::cerr << "wrote " << rc.out_dir << "/saturation.tsv\n";
    return 0;
}

int cmd_export_embeddings(const RunConfig& rc) {
    SplitDataset data = load_data(rc);
    LoadedModel loaded = load_checkpoint(rc.ckpt_path, data);
    auto dm = loaded.model.degree_matrices();
    const auto& sigs = loaded.model.signatures();
    std::ostringstream out;
    out.precision(6);
    out << "entity\tdegree_signature\tembedding\n";
    for (std::int64_t e = 0; e < data.vocab.num_entities(); ++e) {
        const std::int32_t sig = sigs.entity_signature[static_cast<std::size_t>(e)];
        out << data.vocab.entity_name(static_cast<EntityId>(e)) << '\t'
            << degree_signature_string(sigs.signatures[static_cast<std::size_t>(sig)], data.vocab)
            << '\t';
        for (std::int64_t j = 0; j < dm.summary_by_signature.cols(); ++j) {
            if (j) out << ' ';
            out << dm.summary_by_signature(sig, j);
        }
        out << '\n';
    }
    std::filesystem::create_directories(rc.out_dir);
    write_file(rc.out_dir + "/embeddings.tsv", out.str());
    std::cerr << "wrote " << rc.out_dir << "/embeddings.tsv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-graph rule learner"};
    app.require_subcommand(1);

    RunConfig rc;
    std::string config_path;

    // Config file values act as defaults; flags parsed afterwards override
    // them (CLI11 only writes bound variables for options actually given).
    try {
        for (int i = 1; i < argc; ++i) {
            const std::string arg = argv[i];
            if (arg == "--config" && i + 1 < argc)
                config_path = argv[i + 1];
            else if (arg.rfind("--config=", 0) == 0)
                config_path = arg.substr(9);
        }
        if (!config_path.empty()) apply_config_file(rc, read_config_file(config_path));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    CLI::App* train = app.add_subcommand("train", "train a model");
    CLI::App* eval = app.add_subcommand("eval", "filtered MRR / Hit@k on the test split");
    CLI::App* rules = app.add_subcommand("rules", "extract scored rules from a checkpoint");
    CLI::App* sat = app.add_subcommand("saturation", "structural rule saturations");
    CLI::App* exp = app.add_subcommand("export-emb", "export entity embeddings");
    for (CLI::App* cmd : {train, eval, rules, sat, exp}) add_common_options(cmd, rc, config_path);

    CLI11_PARSE(app, argc, argv);
    CLI::App* cmd = app.get_subcommands().front();

    try {
        if (rc.threads > 0) set_worker_count(rc.threads);
        rc.hp.validate();

        if (cmd == train) return cmd_train(rc);
        if (cmd == eval) return cmd_eval(rc);
        if (cmd == rules) return cmd_rules(rc);
        if (cmd == sat) return cmd_saturation(rc);
        if (cmd == exp) return cmd_export_embeddings(rc);
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        const std::string what = e.what();
        if (what.find("dataset directory") != std::string::npos) return 2;
        if (what.find("checkpoint") != std::string::npos) return 3;
        return 1;
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        const std::string what = e.what();
        if (what.find("checkpoint") != std::string::npos) return 3;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
