#include "kgr/neuralnets.hpp"

#include <cmath>

namespace kgr {

std::vector<std::int64_t> Rng::permutation(std::int64_t n) {
    std::vector<std::int64_t> p(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    for (std::int64_t i = n - 1; i > 0; --i) {
        const std::int64_t j = static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(i + 1));
        std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
    return p;
}

ad::Mat uniform_init(Rng& rng, std::int64_t rows, std::int64_t cols, double lo, double hi) {
    ad::Mat m(rows, cols);
    for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
    return m;
}

ad::Mat xavier_init(Rng& rng, std::int64_t rows, std::int64_t cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    return uniform_init(rng, rows, cols, -limit, limit);
}

LstmCell::LstmCell(const std::string& prefix, std::int64_t m, std::int64_t h, Rng& rng)
    : input_dim(m), hidden_dim(h) {
    w = Param(prefix + ".W", xavier_init(rng, 4 * h, m));
    u = Param(prefix + ".U", xavier_init(rng, 4 * h, h));
    ad::Mat bias = ad::Mat::Zero(1, 4 * h);
    bias.middleCols(h, h).setOnes();  // forget gate
    b = Param(prefix + ".b", std::move(bias));
}

LstmState lstm_zero_state(ad::Tape& t, std::int64_t batch, std::int64_t hidden) {
    return {t.leaf(ad::Mat::Zero(batch, hidden)), t.leaf(ad::Mat::Zero(batch, hidden))};
}

LstmState lstm_step(ad::Tape& t, const LstmCellRefs& cell, ad::TensorRef x, const LstmState& prev) {
    using namespace ad;
    const std::int64_t h = cell.hidden_dim;
    // gates = x W^T + h_prev U^T + b, rows are batch entries
    TensorRef wt = matmul_nt(t, x, cell.w);
    TensorRef ut = matmul_nt(t, prev.h, cell.u);
    TensorRef gates = add_rowvec(t, add(t, wt, ut), cell.b);
    TensorRef gi = sigmoid(t, slice_cols(t, gates, 0, h));
    TensorRef gf = sigmoid(t, slice_cols(t, gates, h, h));
    TensorRef go = sigmoid(t, slice_cols(t, gates, 2 * h, h));
    TensorRef gc = tanh_op(t, slice_cols(t, gates, 3 * h, h));
    TensorRef c = add(t, mul(t, gf, prev.c), mul(t, gi, gc));
    TensorRef hh = mul(t, go, tanh_op(t, c));
    return {hh, c};
}

BiLstm::BiLstm(const std::string& prefix, std::int64_t m, std::int64_t h, Rng& rng)
    : input_dim(m), hidden_dim(h), fwd(prefix + ".fwd", m, h, rng), bwd(prefix + ".bwd", m, h, rng) {}

BiLstmOut bilstm_encode(ad::Tape& t, const BiLstmRefs& refs,
                        const std::vector<ad::TensorRef>& steps, std::int64_t hidden_dim) {
    contract(!steps.empty(), "bilstm_encode: empty sequence");
    const std::int64_t d = static_cast<std::int64_t>(steps.size());
    const std::int64_t batch = t.value(steps[0]).rows();

    std::vector<ad::TensorRef> fh(static_cast<std::size_t>(d));
    LstmState state = lstm_zero_state(t, batch, hidden_dim);
    for (std::int64_t i = 0; i < d; ++i) {
        state = lstm_step(t, refs.fwd, steps[static_cast<std::size_t>(i)], state);
        fh[static_cast<std::size_t>(i)] = state.h;
    }
    const ad::TensorRef fwd_last = state.h;

    std::vector<ad::TensorRef> bh(static_cast<std::size_t>(d));
    state = lstm_zero_state(t, batch, hidden_dim);
    for (std::int64_t i = d - 1; i >= 0; --i) {
        state = lstm_step(t, refs.bwd, steps[static_cast<std::size_t>(i)], state);
        bh[static_cast<std::size_t>(i)] = state.h;
    }
    const ad::TensorRef bwd_first = state.h;  // backward state at time step 1

    BiLstmOut out;
    out.step_concat.resize(static_cast<std::size_t>(d));
    for (std::int64_t i = 0; i < d; ++i)
        out.step_concat[static_cast<std::size_t>(i)] =
            ad::concat_cols(t, fh[static_cast<std::size_t>(i)], bh[static_cast<std::size_t>(i)]);
    out.summary = ad::concat_cols(t, fwd_last, bwd_first);
    return out;
}

AttentionHead::AttentionHead(const std::string& prefix, std::int64_t in, std::int64_t out, Rng& rng) {
    w = Param(prefix + ".W", xavier_init(rng, out, in));
    b = Param(prefix + ".b", ad::Mat::Zero(1, out));
}

ad::TensorRef attention_forward(ad::Tape& t, const AttentionHeadRefs& head, ad::TensorRef x) {
    ad::TensorRef logits = ad::add_rowvec(t, ad::matmul_nt(t, x, head.w), head.b);
    return ad::softmax_rows(t, logits);
}

bool Adam::step(std::vector<Param*>& params, const std::vector<const ad::Mat*>& grads) {
    contract(params.size() == grads.size(), "adam: param/grad count mismatch");
    for (const ad::Mat* g : grads) {
        if (g->size() != 0 && !g->allFinite()) {
            ++skipped_;
            return false;
        }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        const ad::Mat* g = grads[i];
        if (g->size() == 0) {
            // Untouched parameter this batch: zero gradient still decays moments.
            p.m *= cfg_.beta1;
            p.v *= cfg_.beta2;
        } else {
            contract(g->rows() == p.value.rows() && g->cols() == p.value.cols(),
                     "adam: gradient shape mismatch for " + p.name);
            p.m = cfg_.beta1 * p.m + (1.0 - cfg_.beta1) * (*g);
            p.v = cfg_.beta2 * p.v + (1.0 - cfg_.beta2) * g->cwiseProduct(*g);
        }
        const ad::Mat mhat = p.m / bc1;
        const ad::Mat vhat = p.v / bc2;
        p.value.array() -= cfg_.lr * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
    }
    return true;
}

}  // namespace kgr
