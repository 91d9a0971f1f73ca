#pragma once
// Reverse-mode autodiff over dense row-major matrices, sized for BiLSTM +
// attention + sparse operator-chain training. One scalar loss, tape-based:
// nodes are recorded in forward order and visited in exact reverse order on
// the backward pass. Gradients accumulate by addition into zeroed buffers.
//
// Everything is 64-bit. A Tape is single-threaded; heavy kernels parallelize
// internally over a fixed chunk grid so results do not depend on the worker
// count.

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kgr/common.hpp"
#include "kgr/sparseops.hpp"

namespace kgr::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct TensorRef {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
};

class Tape {
public:
    // Backward closure: receives the tape and the node's own ref.
    using BackFn = std::function<void(Tape&, TensorRef)>;

    TensorRef leaf(Mat value);
    TensorRef push(Mat value, BackFn back, const char* name);

    const Mat& value(TensorRef t) const { return nodes_[check(t)].val; }
    // Gradient buffer, allocated to zeros on first touch.
    Mat& grad(TensorRef t);
    bool has_grad(TensorRef t) const { return nodes_[check(t)].grad.size() > 0; }

    // Seeds d(seed)/d(seed) = 1 (seed must be 1x1) and propagates to leaves.
    void backward(TensorRef seed);
    void zero_grads();
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Mat val;
        Mat grad;
        BackFn back;
        const char* name = "";
    };
    std::size_t check(TensorRef t) const {
        contract(t.id >= 0 && static_cast<std::size_t>(t.id) < nodes_.size(), "bad tensor ref");
        return static_cast<std::size_t>(t.id);
    }
    std::vector<Node> nodes_;
};

// ---- primitives ------------------------------------------------------------

TensorRef matmul(Tape& t, TensorRef a, TensorRef b);
// a * b^T without materializing the transpose.
TensorRef matmul_nt(Tape& t, TensorRef a, TensorRef b);
TensorRef add(Tape& t, TensorRef a, TensorRef b);
// Broadcasts a 1 x c bias over every row of a.
TensorRef add_rowvec(Tape& t, TensorRef a, TensorRef bias);
TensorRef mul(Tape& t, TensorRef a, TensorRef b);
TensorRef scale(Tape& t, TensorRef a, double c);
TensorRef concat_cols(Tape& t, TensorRef a, TensorRef b);
TensorRef concat_rows(Tape& t, std::span<const TensorRef> parts);
TensorRef slice_cols(Tape& t, TensorRef a, std::int64_t begin, std::int64_t len);
TensorRef sigmoid(Tape& t, TensorRef a);
TensorRef tanh_op(Tape& t, TensorRef a);
TensorRef softmax_rows(Tape& t, TensorRef a);
TensorRef clamp(Tape& t, TensorRef a, double lo, double hi);
TensorRef sum_all(Tape& t, TensorRef a);
// Gathers table rows; backward scatter-adds into the table leaf.
TensorRef embedding_lookup(Tape& t, TensorRef table, std::span<const std::int32_t> rows);

// ---- fused ops -------------------------------------------------------------

// Per-query edge exclusion: the gold edge in the query relation's operator
// and its mirror in the inverse operator.
struct ExclusionPair {
    RelationId rel_fwd = -1;
    EntityId fwd_head = -1, fwd_tail = -1;
    RelationId rel_inv = -1;
    EntityId inv_head = -1, inv_tail = -1;

    bool drops(RelationId rel, EntityId i, EntityId j) const {
        return (rel == rel_fwd && i == fwd_head && j == fwd_tail) ||
               (rel == rel_inv && i == inv_head && j == inv_tail);
    }
};

// Shared context for every hop of a batch: operators, the entity -> rho row
// map, and one exclusion pair per batch row.
struct ChainSpec {
    const OperatorSet* ops = nullptr;
    // entity -> row of the rho tensor; only consulted when use_rho.
    std::vector<std::int32_t> entity_rho_row;
    bool use_rho = true;
    std::vector<ExclusionPair> exclusions;  // one per batch row
};

// One reasoning hop, batched over rows of u (B x |E|):
//   out[b] = sum_k attn[b, k] * (u[b] * Op_k)   (k = 0 is the identity)
// where row e of Op_k is weighted by rho[entity_rho_row[e], k-1] when
// spec.use_rho (the DegreEmbed operator B_{r_k}), and by 1 otherwise (the
// TensorLog operator M_{r_k}). Gradients flow to u, attn and rho; rho may be
// an invalid ref when !spec.use_rho.
TensorRef sparse_chain_hop(Tape& t, TensorRef u, TensorRef attn, TensorRef rho,
                           const ChainSpec& spec);

// Rowwise L1 state normalization. Capped form: u / max(1, ||u||_1), identity
// on rows already within unit mass. Full form (cap = false): u / ||u||_1 for
// every nonzero row.
TensorRef l1_cap_rows(Tape& t, TensorRef a, bool cap = true);

// Mean over batch rows of the all-entity binary cross-entropy against
// onehot(targets[b]), scores clamped to [eps, 1 - eps].
TensorRef bce_onehot_mean(Tape& t, TensorRef scores, std::span<const EntityId> targets,
                          double eps);

// Plain (non-AD) single-vector loss, the same formula; used by oracles.
double bce_onehot_loss(std::span<const double> s, EntityId target, double eps);

// ---- gradient checking -----------------------------------------------------

struct GradCheck {
    double max_rel_err = 0.0;
    std::int64_t n_checked = 0;
};

// Central finite differences on the given parameter coordinates against the
// supplied analytic gradients; f() must re-run the full forward pass.
// Relative error: |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
GradCheck grad_check(const std::function<double()>& f, std::span<double* const> coords,
                     std::span<const double> analytic, double h);

}  // namespace kgr::ad
