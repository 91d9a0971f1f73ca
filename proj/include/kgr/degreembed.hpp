#pragma once
// DegreEmbed model: degree-attention weighted operators, rank-T attention
// chains over them, cross-entropy training with early stopping.
//
// Score of a query q(h, ?) after L hops, rank T:
//   s = v_h^T * sum_j prod_l sum_k a[j][l][k] * B_{r_k}
// where B_{r_0} = I and B_{r_k} carries rho_e[k] in every unit entry of row e
// of the adjacency M_{r_k}. rho_e is softmax attention computed from entity
// e's degree feature sequence through a BiLSTM; a[j][l][*] are softmax rows
// computed from the query embedding through per-rank BiLSTMs.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kgr/autodiff.hpp"
#include "kgr/kgdata.hpp"
#include "kgr/neuralnets.hpp"
#include "kgr/sparseops.hpp"

namespace kgr {

struct HyperParams {
    std::int64_t max_rule_length = 2;  // L
    std::int64_t rank = 3;             // T
    std::int64_t embed_dim = 128;      // m
    std::int64_t hidden_dim = 128;
    double lr = 0.001;
    std::int64_t batch_size = 128;
    std::int64_t max_epochs = 30;
    std::int64_t patience = 3;
    std::uint64_t seed = 33;
    bool inverse = true;
    double clamp_eps = 1e-7;
    // false trains plain TensorLog operators (rho forced to 1): Neural LP mode.
    bool degree_embedding = true;
    // L1 state normalization after every hop.
    bool normalize_states = true;
    // Full form u / ||u||_1 instead of the cap u / max(1, ||u||_1). The full
    // form counteracts the mass shrinkage the degree weights introduce and
    // trains markedly better with them.
    bool normalize_full = true;

    void validate() const;
};

// a[j][l][k]: rank j < T, hop l < L, operator k < n_ops (k = 0 is identity).
struct AttentionTensor {
    std::int64_t rank = 0;
    std::int64_t length = 0;
    std::int64_t n_ops = 0;
    std::vector<double> a;

    AttentionTensor() = default;
    AttentionTensor(std::int64_t t, std::int64_t l, std::int64_t k)
        : rank(t), length(l), n_ops(k), a(static_cast<std::size_t>(t * l * k), 0.0) {}
    double& at(std::int64_t j, std::int64_t l, std::int64_t k) {
        return a[static_cast<std::size_t>((j * length + l) * n_ops + k)];
    }
    double at(std::int64_t j, std::int64_t l, std::int64_t k) const {
        return a[static_cast<std::size_t>((j * length + l) * n_ops + k)];
    }
};

// A link-prediction query q(head, ?) with gold answer `tail`; rel may be an
// inverse id. Reuses the Triple layout.
using Query = Triple;

class DegreEmbedModel {
public:
    DegreEmbedModel(const Vocabulary& vocab, DegreeSignatureSet sigs, const HyperParams& hp);

    const HyperParams& hp() const { return hp_; }
    std::int64_t num_entities() const { return n_entities_; }
    std::int64_t num_relation_ops() const { return n_rel_ops_; }
    const DegreeSignatureSet& signatures() const { return sigs_; }

    // Stable-order parameter list (checkpoint and optimizer order).
    std::vector<Param*> params();
    std::vector<const Param*> params() const;

    // ---- tape-side forward pieces ----

    // Tape leaves for every parameter, created once per tape.
    struct Bound {
        std::vector<ad::TensorRef> refs;  // aligned with params()
        ad::TensorRef of(std::size_t param_index) const { return refs[param_index]; }
    };
    Bound bind(ad::Tape& t) const;

    struct DegreeForward {
        ad::TensorRef rho;      // S x n_rel_ops, rows aligned with input order
        ad::TensorRef summary;  // S x 2*hidden (the entity embedding H)
    };
    // Runs the degree encoder for the given signature ids (deduplicated
    // upstream; rows of the result follow the argument order).
    DegreeForward degree_forward(ad::Tape& t, const Bound& b,
                                 std::span<const std::int32_t> signature_ids) const;

    // Rule attention rows for each query relation in `rels`:
    // result[j][l] is (|rels| x n_ops+1).
    std::vector<std::vector<ad::TensorRef>> rule_attention(
        ad::Tape& t, const Bound& b, std::span<const RelationId> rels) const;

    // Full batched forward: scores (B x |E|) for the queries, gold edges
    // excluded, rho restricted to the signatures reachable from the batch.
    struct BatchForward {
        ad::TensorRef scores;
        ad::TensorRef loss;  // mean BCE, 1 x 1
    };
    BatchForward loss_on_batch(ad::Tape& t, const Bound& b, std::span<const Query> queries,
                               const OperatorSet& ops) const;

    // ---- plain (non-tape) evaluation path ----

    // rho for every entity (n_entities x n_rel_ops) and entity embeddings H.
    struct DegreeMatrices {
        ad::Mat rho_by_signature;      // S_all x n_rel_ops
        ad::Mat summary_by_signature;  // S_all x 2*hidden
    };
    DegreeMatrices degree_matrices() const;

    // Attention tensor for one query relation (used by rule extraction and
    // the eval scorer).
    AttentionTensor attention_for(RelationId q) const;
    std::vector<AttentionTensor> attention_for_all() const;

    // Rank-T chain score over explicit operators; weighted operators carry
    // the DegreEmbed weights, unit operators reproduce Neural LP.
    std::vector<double> score_query(EntityId h, const AttentionTensor& attn,
                                    const OperatorSet& ops, const ad::ExclusionPair& excl) const;

    ad::ExclusionPair exclusion_for(const Query& q, const Vocabulary& vocab) const;

    // entity -> rho row map for a batch: signatures of all entities within
    // L-1 hops of any query head.
    std::vector<std::int32_t> touched_rho_rows(std::span<const Query> queries,
                                               const OperatorSet& ops,
                                               std::vector<std::int32_t>& sig_ids) const;

private:
    HyperParams hp_;
    std::int64_t n_entities_ = 0;
    std::int64_t n_base_relations_ = 0;
    std::int64_t n_rel_ops_ = 0;  // |R| or 2|R|
    DegreeSignatureSet sigs_;

    Param degree_table_;  // (2|R_base|+1) x m
    BiLstm degree_lstm_;
    AttentionHead degree_head_;  // n_rel_ops rows
    Param query_table_;          // n_rel_ops x m
    std::vector<BiLstm> rule_lstm_;          // T
    std::vector<AttentionHead> rule_head_;   // T, out = n_rel_ops + 1

    friend struct ModelCodec;
};

// Materializes the DegreEmbed operators: same sparsity pattern as the 0/1
// operators, entry (e, j) of B_{r_k} = rho_e[k]; slot 0 stays the identity.
OperatorSet build_degre_operators(const OperatorSet& tensorlog_ops,
                                  std::span<const std::int32_t> entity_signature,
                                  const ad::Mat& rho_by_signature);

// ---- training --------------------------------------------------------------

// Strict-improvement early stopping with `patience` consecutive strikes.
class EarlyStopper {
public:
    explicit EarlyStopper(std::int64_t patience) : patience_(patience) {}
    // Returns true when training should stop after this observation.
    bool observe(double metric);
    bool improved_last() const { return improved_last_; }
    double best() const { return best_; }

private:
    std::int64_t patience_;
    std::int64_t strikes_ = 0;
    double best_ = -1.0;
    bool improved_last_ = false;
};

struct EpochLog {
    std::int64_t epoch = 0;
    double train_loss = 0.0;
    double valid_mrr = 0.0;
    double elapsed_s = 0.0;
    std::int64_t skipped_batches = 0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    double best_valid_mrr = 0.0;
    std::int64_t epochs_trained = 0;
};

// Inverse-augmented query list for a split: (h, q, t) and, with inverses
// enabled, (t, inv_q, h).
std::vector<Query> augmented_queries(std::span<const Triple> split, const Vocabulary& vocab);

class Trainer {
public:
    Trainer(DegreEmbedModel& model, const SplitDataset& data);

    // Runs the mini-batch loop with per-epoch validation MRR early stopping.
    // on_epoch (optional) observes each EpochLog as it is produced.
    TrainResult train(const std::function<void(const EpochLog&)>& on_epoch = nullptr);

    const OperatorSet& operators() const { return ops_; }
    Adam& optimizer() { return adam_; }
    Rng& rng() { return rng_; }

private:
    double run_epoch(std::span<const Query> queries);
    double validation_mrr();

    DegreEmbedModel& model_;
    const SplitDataset& data_;
    OperatorSet ops_;
    Adam adam_;
    Rng rng_;
    std::vector<Query> train_queries_;
    std::vector<Query> valid_queries_;
    std::int64_t forward_faults_ = 0;
};

// ---- checkpoints -----------------------------------------------------------

struct Checkpoint {
    HyperParams hp;
    // Vocabulary fingerprint for mismatch detection.
    std::int64_t n_entities = 0;
    std::int64_t n_base_relations = 0;
    std::uint64_t vocab_hash = 0;
    double best_valid_mrr = 0.0;
    std::int64_t epochs_trained = 0;
};

std::uint64_t vocabulary_hash(const Vocabulary& vocab);

void save_checkpoint(const std::string& path, const DegreEmbedModel& model, const Adam& adam,
                     Rng& rng, const Vocabulary& vocab, double best_valid_mrr,
                     std::int64_t epochs_trained);

// Restores the model (reconstructed from stored hyperparameters and the
// dataset's degree signatures), optimizer counters and RNG state. Throws
// IoError on malformed files and ContractViolation on vocabulary mismatch.
struct LoadedModel {
    DegreEmbedModel model;
    Adam adam;
    Rng rng;
    Checkpoint meta;
};
LoadedModel load_checkpoint(const std::string& path, const SplitDataset& data);

}  // namespace kgr
