#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

#include "kgr/degreembed.hpp"
#include "kgr/evalrank.hpp"

namespace kgr {

bool EarlyStopper::observe(double metric) {
    if (metric > best_) {
        best_ = metric;
        strikes_ = 0;
        improved_last_ = true;
        return false;
    }
    improved_last_ = false;
    ++strikes_;
    return strikes_ >= patience_;
}

std::vector<Query> augmented_queries(std::span<const Triple> split, const Vocabulary& vocab) {
    std::vector<Query> out;
    out.reserve(split.size() * (vocab.inverse_enabled() ? 2 : 1));
    for (const Triple& t : split) {
        out.push_back(t);
        if (vocab.inverse_enabled()) out.push_back({t.tail, vocab.inverse_of(t.rel), t.head});
    }
    return out;
}

Trainer::Trainer(DegreEmbedModel& model, const SplitDataset& data)
    : model_(model),
      data_(data),
      ops_(build_operators(data.reasoning_graph(), data.vocab)),
      adam_(AdamConfig{.lr = model.hp().lr}),
      rng_(model.hp().seed),
      train_queries_(augmented_queries(data.train, data.vocab)),
      valid_queries_(augmented_queries(data.valid, data.vocab)) {}

double Trainer::run_epoch(std::span<const Query> queries) {
    const std::int64_t n = static_cast<std::int64_t>(queries.size());
    const std::int64_t bs = model_.hp().batch_size;
    std::vector<Param*> params = model_.params();
    double loss_sum = 0.0;
    std::int64_t counted = 0;
    for (std::int64_t begin = 0; begin < n; begin += bs) {
        const std::int64_t end = std::min(begin + bs, n);
        std::span<const Query> batch = queries.subspan(static_cast<std::size_t>(begin),
                                                       static_cast<std::size_t>(end - begin));
        ad::Tape tape;
        DegreEmbedModel::Bound bound = model_.bind(tape);
        double batch_loss = 0.0;
        std::vector<const ad::Mat*> grads(params.size());
        static const ad::Mat kEmpty;
        try {
            auto fwd = model_.loss_on_batch(tape, bound, batch, ops_);
            batch_loss = tape.value(fwd.loss)(0, 0);
            tape.backward(fwd.loss);
            for (std::size_t i = 0; i < params.size(); ++i)
                grads[i] = tape.has_grad(bound.refs[i]) ? &tape.grad(bound.refs[i]) : &kEmpty;
        } catch (const NumericFault&) {
            ++forward_faults_;
            continue;
        }
        if (adam_.step(params, grads)) {
            loss_sum += batch_loss * static_cast<double>(batch.size());
            counted += static_cast<std::int64_t>(batch.size());
        }
    }
    return counted > 0 ? loss_sum / static_cast<double>(counted) : 0.0;
}

double Trainer::validation_mrr() {
    if (valid_queries_.empty()) return 0.0;
    return evaluate(data_, model_, ops_, data_.valid).mrr;
}

TrainResult Trainer::train(const std::function<void(const EpochLog&)>& on_epoch) {
    TrainResult result;
    EarlyStopper stopper(model_.hp().patience);
    std::vector<Param*> params = model_.params();

    // Best-epoch snapshot: values plus optimizer state.
    std::vector<Param> best;
    std::int64_t best_step = 0, best_skipped = 0;
    auto snapshot = [&] {
        best.clear();
        for (Param* p : params) best.push_back(*p);
        best_step = adam_.step_count();
        best_skipped = adam_.skipped_batches();
    };
    snapshot();  // epoch 0 fallback

    for (std::int64_t epoch = 1; epoch <= model_.hp().max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::int64_t skipped_before = adam_.skipped_batches() + forward_faults_;

        std::vector<Query> shuffled;
        shuffled.reserve(train_queries_.size());
        for (std::int64_t i : rng_.permutation(static_cast<std::int64_t>(train_queries_.size())))
            shuffled.push_back(train_queries_[static_cast<std::size_t>(i)]);
        const double train_loss = run_epoch(shuffled);

        const std::int64_t n_batches =
            (static_cast<std::int64_t>(train_queries_.size()) + model_.hp().batch_size - 1) /
            model_.hp().batch_size;
        const std::int64_t skipped =
            adam_.skipped_batches() + forward_faults_ - skipped_before;
        if (n_batches > 0 && skipped >= n_batches)
            throw NumericFault("training diverged: every batch of epoch " +
                               std::to_string(epoch) + " produced non-finite values");

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = train_loss;
        log.valid_mrr = validation_mrr();
        log.skipped_batches = skipped;
        log.elapsed_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(log);
        result.epochs_trained = epoch;
        if (on_epoch) on_epoch(log);

        const bool stop = stopper.observe(log.valid_mrr);
        if (stopper.improved_last()) snapshot();
        if (stop) break;
    }

    // Keep the best validation checkpoint.
    if (!best.empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            params[i]->value = best[i].value;
            params[i]->m = best[i].m;
            params[i]->v = best[i].v;
        }
        adam_.restore(best_step, best_skipped);
    }
    result.best_valid_mrr = std::max(stopper.best(), 0.0);
    return result;
}

// ---- checkpoint codec --------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'K', 'G', 'R', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_i64(std::ostream& out, std::int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_str(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_mat(std::ostream& out, const ad::Mat& m) {
    write_i64(out, m.rows());
    write_i64(out, m.cols());
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw IoError("checkpoint truncated");
    return v;
}
std::int64_t read_i64(std::istream& in) {
    std::int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw IoError("checkpoint truncated");
    return v;
}
double read_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw IoError("checkpoint truncated");
    return v;
}
std::string read_str(std::istream& in) {
    const std::uint64_t n = read_u64(in);
    if (n > (1ull << 32)) throw IoError("checkpoint corrupt: oversized string");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw IoError("checkpoint truncated");
    return s;
}
ad::Mat read_mat(std::istream& in) {
    const std::int64_t r = read_i64(in);
    const std::int64_t c = read_i64(in);
    if (r < 0 || c < 0 || r * c > (1ll << 32)) throw IoError("checkpoint corrupt: bad matrix shape");
    ad::Mat m(r, c);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
    if (!in) throw IoError("checkpoint truncated");
    return m;
}

void write_hp(std::ostream& out, const HyperParams& hp) {
    write_i64(out, hp.max_rule_length);
    write_i64(out, hp.rank);
    write_i64(out, hp.embed_dim);
    write_i64(out, hp.hidden_dim);
    write_f64(out, hp.lr);
    write_i64(out, hp.batch_size);
    write_i64(out, hp.max_epochs);
    write_i64(out, hp.patience);
    write_u64(out, hp.seed);
    write_u64(out, hp.inverse ? 1 : 0);
    write_f64(out, hp.clamp_eps);
    write_u64(out, hp.degree_embedding ? 1 : 0);
    write_u64(out, hp.normalize_states ? 1 : 0);
    write_u64(out, hp.normalize_full ? 1 : 0);
}

HyperParams read_hp(std::istream& in) {
    HyperParams hp;
    hp.max_rule_length = read_i64(in);
    hp.rank = read_i64(in);
    hp.embed_dim = read_i64(in);
    hp.hidden_dim = read_i64(in);
    hp.lr = read_f64(in);
    hp.batch_size = read_i64(in);
    hp.max_epochs = read_i64(in);
    hp.patience = read_i64(in);
    hp.seed = read_u64(in);
    hp.inverse = read_u64(in) != 0;
    hp.clamp_eps = read_f64(in);
    hp.degree_embedding = read_u64(in) != 0;
    hp.normalize_states = read_u64(in) != 0;
    hp.normalize_full = read_u64(in) != 0;
    return hp;
}

}  // namespace

std::uint64_t vocabulary_hash(const Vocabulary& vocab) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    auto mix = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= 0xff;
        h *= 1099511628211ull;
    };
    for (std::int64_t e = 0; e < vocab.num_entities(); ++e)
        mix(vocab.entity_name(static_cast<EntityId>(e)));
    for (std::int64_t r = 0; r < vocab.num_base_relations(); ++r)
        mix(vocab.relation_name(static_cast<RelationId>(r)));
    return h;
}

void save_checkpoint(const std::string& path, const DegreEmbedModel& model, const Adam& adam,
                     Rng& rng, const Vocabulary& vocab, double best_valid_mrr,
                     std::int64_t epochs_trained) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof kMagic);
    write_hp(out, model.hp());
    write_i64(out, vocab.num_entities());
    write_i64(out, vocab.num_base_relations());
    write_u64(out, vocabulary_hash(vocab));
    write_f64(out, best_valid_mrr);
    write_i64(out, epochs_trained);

    const auto params = model.params();
    write_u64(out, params.size());
    for (const Param* p : params) {
        write_str(out, p->name);
        write_mat(out, p->value);
        write_mat(out, p->m);
        write_mat(out, p->v);
    }
    write_i64(out, adam.step_count());
    write_i64(out, adam.skipped_batches());
    std::ostringstream rng_state;
    rng_state << rng.engine();
    write_str(out, rng_state.str());
    if (!out) throw IoError("short write on checkpoint: " + path);
}

LoadedModel load_checkpoint(const std::string& path, const SplitDataset& data) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw IoError("not a kgr checkpoint: " + path);

    Checkpoint meta;
    meta.hp = read_hp(in);
    meta.n_entities = read_i64(in);
    meta.n_base_relations = read_i64(in);
    meta.vocab_hash = read_u64(in);
    meta.best_valid_mrr = read_f64(in);
    meta.epochs_trained = read_i64(in);

    contract(meta.n_entities == data.vocab.num_entities() &&
                 meta.n_base_relations == data.vocab.num_base_relations() &&
                 meta.vocab_hash == vocabulary_hash(data.vocab) &&
                 meta.hp.inverse == data.vocab.inverse_enabled(),
             "checkpoint/vocabulary mismatch");

    DegreEmbedModel model(data.vocab,
                          dedupe_degree_features(degree_features(data.reasoning_graph(), data.vocab)),
                          meta.hp);
    auto params = model.params();
    const std::uint64_t count = read_u64(in);
    contract(count == params.size(), "checkpoint parameter count mismatch");
    for (Param* p : params) {
        const std::string name = read_str(in);
        contract(name == p->name, "checkpoint parameter order mismatch: " + name);
        ad::Mat value = read_mat(in);
        ad::Mat m = read_mat(in);
        ad::Mat v = read_mat(in);
        contract(value.rows() == p->value.rows() && value.cols() == p->value.cols(),
                 "checkpoint parameter shape mismatch: " + name);
        p->value = std::move(value);
        p->m = std::move(m);
        p->v = std::move(v);
    }
    Adam adam(AdamConfig{.lr = meta.hp.lr});
    const std::int64_t steps = read_i64(in);
    const std::int64_t skipped = read_i64(in);
    adam.restore(steps, skipped);
    Rng rng(meta.hp.seed);
    std::istringstream rng_state(read_str(in));
    rng_state >> rng.engine();
    return LoadedModel{std::move(model), std::move(adam), std::move(rng), meta};
}

}  // namespace kgr
