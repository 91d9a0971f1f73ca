#pragma once
// Recurrent encoders and optimization: LSTM / BiLSTM over the autodiff tape,
// softmax attention heads, Adam with bias correction, and seeded init.
//
// Gate layout is fused: W (4h x m), U (4h x h), b (1 x 4h), slice order
// [input, forget, output, cell]. Forget-gate bias starts at 1.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kgr/autodiff.hpp"

namespace kgr {

// Named parameter tensor with Adam moment buffers.
struct Param {
    std::string name;
    ad::Mat value;
    ad::Mat m;  // first moment
    ad::Mat v;  // second moment

    Param() = default;
    Param(std::string n, ad::Mat val)
        : name(std::move(n)),
          value(std::move(val)),
          m(ad::Mat::Zero(value.rows(), value.cols())),
          v(ad::Mat::Zero(value.rows(), value.cols())) {}
};

// Deterministic uniform draws; the distribution is hand-rolled so results do
// not depend on the standard library's implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform(double lo, double hi) {
        const double u = static_cast<double>(gen_()) / static_cast<double>(std::mt19937_64::max());
        return lo + u * (hi - lo);
    }
    std::uint64_t next_u64() { return gen_(); }
    // Fisher-Yates over [0, n) using next_u64 modulo (bias negligible here).
    std::vector<std::int64_t> permutation(std::int64_t n);

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

ad::Mat uniform_init(Rng& rng, std::int64_t rows, std::int64_t cols, double lo, double hi);
ad::Mat xavier_init(Rng& rng, std::int64_t rows, std::int64_t cols);

struct LstmCell {
    std::int64_t input_dim = 0;
    std::int64_t hidden_dim = 0;
    Param w;  // 4h x m
    Param u;  // 4h x h
    Param b;  // 1 x 4h

    LstmCell() = default;
    LstmCell(const std::string& prefix, std::int64_t m, std::int64_t h, Rng& rng);
};

// Tape-side handles for one cell's parameters within a forward pass.
struct LstmCellRefs {
    ad::TensorRef w, u, b;
    std::int64_t hidden_dim = 0;
};

// One step for a batch of sequences: x is (B x m), h/c are (B x hidden).
struct LstmState {
    ad::TensorRef h, c;
};
LstmState lstm_step(ad::Tape& t, const LstmCellRefs& cell, ad::TensorRef x, const LstmState& prev);
LstmState lstm_zero_state(ad::Tape& t, std::int64_t batch, std::int64_t hidden);

struct BiLstm {
    std::int64_t input_dim = 0;
    std::int64_t hidden_dim = 0;
    LstmCell fwd;
    LstmCell bwd;

    BiLstm() = default;
    BiLstm(const std::string& prefix, std::int64_t m, std::int64_t h, Rng& rng);
};

struct BiLstmRefs {
    LstmCellRefs fwd, bwd;
};

// Encodes a batch of equal-length sequences. steps[i] is the (B x m) input of
// time step i. Per-step output i = [h_i || h'_i]; the sequence summary is
// [h_d || h'_1] (last forward state, first-step backward state).
struct BiLstmOut {
    std::vector<ad::TensorRef> step_concat;  // d entries, each B x 2h
    ad::TensorRef summary;                   // B x 2h
};
BiLstmOut bilstm_encode(ad::Tape& t, const BiLstmRefs& refs,
                        const std::vector<ad::TensorRef>& steps, std::int64_t hidden_dim);

// Linear projection + softmax over rows: softmax(x W^T + b).
struct AttentionHead {
    Param w;  // out x in
    Param b;  // 1 x out

    AttentionHead() = default;
    AttentionHead(const std::string& prefix, std::int64_t in, std::int64_t out, Rng& rng);
};
struct AttentionHeadRefs {
    ad::TensorRef w, b;
};
ad::TensorRef attention_forward(ad::Tape& t, const AttentionHeadRefs& head, ad::TensorRef x);

// ---- Adam ------------------------------------------------------------------

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    // Applies one bias-corrected update to every (param, grad) pair. If any
    // gradient is non-finite the whole batch is skipped and counted.
    // Returns true when the update was applied.
    bool step(std::vector<Param*>& params, const std::vector<const ad::Mat*>& grads);

    std::int64_t step_count() const { return step_; }
    std::int64_t skipped_batches() const { return skipped_; }
    const AdamConfig& config() const { return cfg_; }

    void restore(std::int64_t step, std::int64_t skipped) {
        step_ = step;
        skipped_ = skipped;
    }

private:
    AdamConfig cfg_;
    std::int64_t step_ = 0;
    std::int64_t skipped_ = 0;
};

}  // namespace kgr
