#include "kgr/degreembed.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

#include "kgr/parallel.hpp"

namespace kgr {

void HyperParams::validate() const {
    contract(max_rule_length >= 1, "hyperparams: L >= 1");
    contract(rank >= 1, "hyperparams: T >= 1");
    contract(clamp_eps > 0.0 && clamp_eps < 0.5, "hyperparams: clamp eps in (0, 0.5)");
    contract(embed_dim >= 1 && hidden_dim >= 1, "hyperparams: dims >= 1");
    contract(batch_size >= 1, "hyperparams: batch size >= 1");
    contract(max_epochs >= 0, "hyperparams: max epochs >= 0");
    contract(patience >= 1, "hyperparams: patience >= 1");
    contract(lr > 0.0, "hyperparams: lr > 0");
}

DegreEmbedModel::DegreEmbedModel(const Vocabulary& vocab, DegreeSignatureSet sigs,
                                 const HyperParams& hp)
    : hp_(hp),
      n_entities_(vocab.num_entities()),
      n_base_relations_(vocab.num_base_relations()),
      n_rel_ops_(vocab.num_relation_ids()),
      sigs_(std::move(sigs)) {
    hp_.validate();
    contract(hp_.inverse == vocab.inverse_enabled(), "hyperparams/vocab inverse flag mismatch");
    Rng rng(hp_.seed);
    const std::int64_t m = hp_.embed_dim;
    const std::int64_t h = hp_.hidden_dim;
    degree_table_ = Param("degree_table",
                          uniform_init(rng, 2 * n_base_relations_ + 1, m, -0.1, 0.1));
    degree_lstm_ = BiLstm("degree_lstm", m, h, rng);
    degree_head_ = AttentionHead("degree_head", 2 * h, n_rel_ops_, rng);
    query_table_ = Param("query_table", uniform_init(rng, n_rel_ops_, m, -0.1, 0.1));
    rule_lstm_.reserve(static_cast<std::size_t>(hp_.rank));
    rule_head_.reserve(static_cast<std::size_t>(hp_.rank));
    for (std::int64_t j = 0; j < hp_.rank; ++j) {
        const std::string tag = std::to_string(j);
        rule_lstm_.emplace_back("rule_lstm" + tag, m, h, rng);
        rule_head_.emplace_back("rule_head" + tag, 2 * h, n_rel_ops_ + 1, rng);
    }
}

std::vector<Param*> DegreEmbedModel::params() {
    std::vector<Param*> out;
    auto cell = [&](LstmCell& c) {
        out.push_back(&c.w);
        out.push_back(&c.u);
        out.push_back(&c.b);
    };
    out.push_back(&degree_table_);
    cell(degree_lstm_.fwd);
    cell(degree_lstm_.bwd);
    out.push_back(&degree_head_.w);
    out.push_back(&degree_head_.b);
    out.push_back(&query_table_);
    for (std::int64_t j = 0; j < hp_.rank; ++j) {
        cell(rule_lstm_[static_cast<std::size_t>(j)].fwd);
        cell(rule_lstm_[static_cast<std::size_t>(j)].bwd);
        out.push_back(&rule_head_[static_cast<std::size_t>(j)].w);
        out.push_back(&rule_head_[static_cast<std::size_t>(j)].b);
    }
    return out;
}

std::vector<const Param*> DegreEmbedModel::params() const {
    auto mut = const_cast<DegreEmbedModel*>(this)->params();
    return {mut.begin(), mut.end()};
}

DegreEmbedModel::Bound DegreEmbedModel::bind(ad::Tape& t) const {
    Bound b;
    for (const Param* p : params()) b.refs.push_back(t.leaf(p->value));
    return b;
}

namespace {

// Indices of each parameter group inside params(); must mirror params().
struct ParamLayout {
    static constexpr std::size_t degree_table = 0;
    static constexpr std::size_t degree_lstm = 1;   // fwd(3), bwd(3)
    static constexpr std::size_t degree_head = 7;   // w, b
    static constexpr std::size_t query_table = 9;
    static constexpr std::size_t rule_base = 10;    // per rank: 6 lstm + 2 head
    static constexpr std::size_t per_rank = 8;
};

LstmCellRefs cell_refs(const DegreEmbedModel::Bound& b, std::size_t at, std::int64_t hidden) {
    return {b.of(at), b.of(at + 1), b.of(at + 2), hidden};
}

}  // namespace

DegreEmbedModel::DegreeForward DegreEmbedModel::degree_forward(
    ad::Tape& t, const Bound& b, std::span<const std::int32_t> signature_ids) const {
    contract(!signature_ids.empty(), "degree_forward: no signatures");
    const std::int64_t s_total = static_cast<std::int64_t>(signature_ids.size());

    // Group by sequence length so each group runs as one batched BiLSTM.
    std::map<std::int64_t, std::vector<std::int64_t>> by_len;
    for (std::int64_t i = 0; i < s_total; ++i) {
        const auto sig = signature_ids[static_cast<std::size_t>(i)];
        contract(sig >= 0 && sig < sigs_.num_signatures(), "degree_forward: bad signature id");
        by_len[static_cast<std::int64_t>(
                   sigs_.signatures[static_cast<std::size_t>(sig)].size())]
            .push_back(i);
    }

    BiLstmRefs lstm{cell_refs(b, ParamLayout::degree_lstm, hp_.hidden_dim),
                    cell_refs(b, ParamLayout::degree_lstm + 3, hp_.hidden_dim)};
    AttentionHeadRefs head{b.of(ParamLayout::degree_head), b.of(ParamLayout::degree_head + 1)};

    std::vector<ad::TensorRef> rho_parts, sum_parts;
    std::vector<std::int32_t> order;  // input index per concat row
    order.reserve(static_cast<std::size_t>(s_total));
    for (const auto& [d, members] : by_len) {
        std::vector<ad::TensorRef> steps;
        steps.reserve(static_cast<std::size_t>(d));
        for (std::int64_t i = 0; i < d; ++i) {
            std::vector<std::int32_t> rows;
            rows.reserve(members.size());
            for (std::int64_t mi : members) {
                const auto& slots =
                    sigs_.signatures[static_cast<std::size_t>(signature_ids[static_cast<std::size_t>(mi)])];
                rows.push_back(static_cast<std::int32_t>(
                    degree_slot_row(slots[static_cast<std::size_t>(i)])));
            }
            steps.push_back(ad::embedding_lookup(t, b.of(ParamLayout::degree_table), rows));
        }
        BiLstmOut enc = bilstm_encode(t, lstm, steps, hp_.hidden_dim);
        rho_parts.push_back(attention_forward(t, head, enc.summary));
        sum_parts.push_back(enc.summary);
        for (std::int64_t mi : members) order.push_back(static_cast<std::int32_t>(mi));
    }

    ad::TensorRef rho_cat = rho_parts.size() == 1 ? rho_parts[0] : ad::concat_rows(t, rho_parts);
    ad::TensorRef sum_cat = sum_parts.size() == 1 ? sum_parts[0] : ad::concat_rows(t, sum_parts);

    // Restore input order: perm[input index] = row in the concatenation.
    std::vector<std::int32_t> perm(static_cast<std::size_t>(s_total));
    for (std::int32_t row = 0; row < static_cast<std::int32_t>(s_total); ++row)
        perm[static_cast<std::size_t>(order[static_cast<std::size_t>(row)])] = row;
    DegreeForward out;
    out.rho = ad::embedding_lookup(t, rho_cat, perm);
    out.summary = ad::embedding_lookup(t, sum_cat, perm);
    return out;
}

std::vector<std::vector<ad::TensorRef>> DegreEmbedModel::rule_attention(
    ad::Tape& t, const Bound& b, std::span<const RelationId> rels) const {
    contract(!rels.empty(), "rule_attention: no relations");
    std::vector<std::int32_t> rows(rels.begin(), rels.end());
    for (std::int32_t r : rows)
        contract(r >= 0 && r < n_rel_ops_, "rule_attention: relation id out of range");
    ad::TensorRef x = ad::embedding_lookup(t, b.of(ParamLayout::query_table), rows);
    // The same query embedding is fed at every one of the L steps.
    std::vector<ad::TensorRef> steps(static_cast<std::size_t>(hp_.max_rule_length), x);

    std::vector<std::vector<ad::TensorRef>> attn(static_cast<std::size_t>(hp_.rank));
    for (std::int64_t j = 0; j < hp_.rank; ++j) {
        const std::size_t base = ParamLayout::rule_base + static_cast<std::size_t>(j) * ParamLayout::per_rank;
        BiLstmRefs lstm{cell_refs(b, base, hp_.hidden_dim), cell_refs(b, base + 3, hp_.hidden_dim)};
        AttentionHeadRefs head{b.of(base + 6), b.of(base + 7)};
        BiLstmOut enc = bilstm_encode(t, lstm, steps, hp_.hidden_dim);
        auto& per_hop = attn[static_cast<std::size_t>(j)];
        per_hop.reserve(static_cast<std::size_t>(hp_.max_rule_length));
        for (std::int64_t l = 0; l < hp_.max_rule_length; ++l)
            per_hop.push_back(attention_forward(t, head, enc.step_concat[static_cast<std::size_t>(l)]));
    }
    return attn;
}

ad::ExclusionPair DegreEmbedModel::exclusion_for(const Query& q, const Vocabulary& vocab) const {
    ad::ExclusionPair x;
    x.rel_fwd = q.rel;
    x.fwd_head = q.head;
    x.fwd_tail = q.tail;
    if (vocab.inverse_enabled()) {
        x.rel_inv = vocab.inverse_of(q.rel);
        x.inv_head = q.tail;
        x.inv_tail = q.head;
    }
    return x;
}

std::vector<std::int32_t> DegreEmbedModel::touched_rho_rows(std::span<const Query> queries,
                                                            const OperatorSet& ops,
                                                            std::vector<std::int32_t>& sig_ids) const {
    // Entities whose operator rows can be multiplied: within L-1 hops of a head.
    std::vector<char> visited(static_cast<std::size_t>(n_entities_), 0);
    std::deque<std::pair<EntityId, std::int64_t>> frontier;
    for (const Query& q : queries) {
        if (!visited[static_cast<std::size_t>(q.head)]) {
            visited[static_cast<std::size_t>(q.head)] = 1;
            frontier.emplace_back(q.head, 0);
        }
    }
    const std::int64_t radius = hp_.max_rule_length - 1;
    while (!frontier.empty()) {
        auto [e, depth] = frontier.front();
        frontier.pop_front();
        if (depth >= radius) continue;
        for (EntityId nb : ops.any_neighbors(e)) {
            if (!visited[static_cast<std::size_t>(nb)]) {
                visited[static_cast<std::size_t>(nb)] = 1;
                frontier.emplace_back(nb, depth + 1);
            }
        }
    }
    sig_ids.clear();
    std::vector<std::int32_t> sig_row(static_cast<std::size_t>(sigs_.num_signatures()), -1);
    std::vector<std::int32_t> entity_row(static_cast<std::size_t>(n_entities_), -1);
    for (std::int64_t e = 0; e < n_entities_; ++e) {
        if (!visited[static_cast<std::size_t>(e)]) continue;
        const std::int32_t sig = sigs_.entity_signature[static_cast<std::size_t>(e)];
        if (sig_row[static_cast<std::size_t>(sig)] < 0) {
            sig_row[static_cast<std::size_t>(sig)] = static_cast<std::int32_t>(sig_ids.size());
            sig_ids.push_back(sig);
        }
        entity_row[static_cast<std::size_t>(e)] = sig_row[static_cast<std::size_t>(sig)];
    }
    return entity_row;
}

DegreEmbedModel::BatchForward DegreEmbedModel::loss_on_batch(ad::Tape& t, const Bound& b,
                                                             std::span<const Query> queries,
                                                             const OperatorSet& ops) const {
    contract(!queries.empty(), "loss_on_batch: empty batch");
    const std::int64_t batch = static_cast<std::int64_t>(queries.size());

    ad::ChainSpec spec;
    spec.ops = &ops;
    spec.use_rho = hp_.degree_embedding;
    spec.exclusions.reserve(static_cast<std::size_t>(batch));

    ad::TensorRef rho;  // invalid in TensorLog mode
    if (hp_.degree_embedding) {
        std::vector<std::int32_t> sig_ids;
        spec.entity_rho_row = touched_rho_rows(queries, ops, sig_ids);
        rho = degree_forward(t, b, sig_ids).rho;
    }

    // Distinct query relations share one attention computation.
    std::vector<RelationId> rels;
    std::vector<std::int32_t> rel_row(static_cast<std::size_t>(n_rel_ops_), -1);
    std::vector<std::int32_t> q_rel_row(static_cast<std::size_t>(batch));
    for (std::int64_t i = 0; i < batch; ++i) {
        const RelationId r = queries[static_cast<std::size_t>(i)].rel;
        contract(r >= 0 && r < n_rel_ops_, "loss_on_batch: query relation out of range");
        if (rel_row[static_cast<std::size_t>(r)] < 0) {
            rel_row[static_cast<std::size_t>(r)] = static_cast<std::int32_t>(rels.size());
            rels.push_back(r);
        }
        q_rel_row[static_cast<std::size_t>(i)] = rel_row[static_cast<std::size_t>(r)];
    }
    auto attn = rule_attention(t, b, rels);

    ad::Mat u0 = ad::Mat::Zero(batch, n_entities_);
    std::vector<EntityId> targets(static_cast<std::size_t>(batch));
    for (std::int64_t i = 0; i < batch; ++i) {
        const Query& q = queries[static_cast<std::size_t>(i)];
        contract(q.head >= 0 && q.head < n_entities_ && q.tail >= 0 && q.tail < n_entities_,
                 "loss_on_batch: entity out of range");
        u0(i, q.head) = 1.0;
        targets[static_cast<std::size_t>(i)] = q.tail;
        ad::ExclusionPair x;
        x.rel_fwd = q.rel;
        x.fwd_head = q.head;
        x.fwd_tail = q.tail;
        if (hp_.inverse) {
            const RelationId base = static_cast<RelationId>(n_rel_ops_ / 2);
            x.rel_inv = q.rel < base ? q.rel + base : q.rel - base;
            x.inv_head = q.tail;
            x.inv_tail = q.head;
        }
        spec.exclusions.push_back(x);
    }
    ad::TensorRef u_init = t.leaf(std::move(u0));

    ad::TensorRef total;
    for (std::int64_t j = 0; j < hp_.rank; ++j) {
        ad::TensorRef u = u_init;
        for (std::int64_t l = 0; l < hp_.max_rule_length; ++l) {
            ad::TensorRef a_rows = ad::embedding_lookup(
                t, attn[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)], q_rel_row);
            u = ad::sparse_chain_hop(t, u, a_rows, rho, spec);
            if (hp_.normalize_states) u = ad::l1_cap_rows(t, u, !hp_.normalize_full);
        }
        total = (j == 0) ? u : ad::add(t, total, u);
    }

    BatchForward out;
    out.scores = total;
    out.loss = ad::bce_onehot_mean(t, total, targets, hp_.clamp_eps);
    return out;
}

DegreEmbedModel::DegreeMatrices DegreEmbedModel::degree_matrices() const {
    const std::int64_t s_all = sigs_.num_signatures();
    DegreeMatrices out;
    out.rho_by_signature.resize(s_all, n_rel_ops_);
    out.summary_by_signature.resize(s_all, 2 * hp_.hidden_dim);
    const std::int64_t chunk = 256;  // bounds tape memory
    for (std::int64_t begin = 0; begin < s_all; begin += chunk) {
        const std::int64_t end = std::min(begin + chunk, s_all);
        ad::Tape t;
        Bound b = bind(t);
        std::vector<std::int32_t> ids(static_cast<std::size_t>(end - begin));
        for (std::int64_t i = begin; i < end; ++i)
            ids[static_cast<std::size_t>(i - begin)] = static_cast<std::int32_t>(i);
        DegreeForward df = degree_forward(t, b, ids);
        out.rho_by_signature.middleRows(begin, end - begin) = t.value(df.rho);
        out.summary_by_signature.middleRows(begin, end - begin) = t.value(df.summary);
    }
    return out;
}

AttentionTensor DegreEmbedModel::attention_for(RelationId q) const {
    ad::Tape t;
    Bound b = bind(t);
    const RelationId rels[1] = {q};
    auto attn = rule_attention(t, b, rels);
    AttentionTensor out(hp_.rank, hp_.max_rule_length, n_rel_ops_ + 1);
    for (std::int64_t j = 0; j < hp_.rank; ++j)
        for (std::int64_t l = 0; l < hp_.max_rule_length; ++l) {
            const ad::Mat& row = t.value(attn[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)]);
            for (std::int64_t k = 0; k <= n_rel_ops_; ++k) out.at(j, l, k) = row(0, k);
        }
    return out;
}

std::vector<AttentionTensor> DegreEmbedModel::attention_for_all() const {
    ad::Tape t;
    Bound b = bind(t);
    std::vector<RelationId> rels(static_cast<std::size_t>(n_rel_ops_));
    for (std::int64_t r = 0; r < n_rel_ops_; ++r) rels[static_cast<std::size_t>(r)] = static_cast<RelationId>(r);
    auto attn = rule_attention(t, b, rels);
    std::vector<AttentionTensor> out(static_cast<std::size_t>(n_rel_ops_),
                                     AttentionTensor(hp_.rank, hp_.max_rule_length, n_rel_ops_ + 1));
    for (std::int64_t j = 0; j < hp_.rank; ++j)
        for (std::int64_t l = 0; l < hp_.max_rule_length; ++l) {
            const ad::Mat& rows = t.value(attn[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)]);
            for (std::int64_t r = 0; r < n_rel_ops_; ++r)
                for (std::int64_t k = 0; k <= n_rel_ops_; ++k)
                    out[static_cast<std::size_t>(r)].at(j, l, k) = rows(r, k);
        }
    return out;
}

std::vector<double> DegreEmbedModel::score_query(EntityId h, const AttentionTensor& attn,
                                                 const OperatorSet& ops,
                                                 const ad::ExclusionPair& excl) const {
    contract(h >= 0 && h < ops.num_entities, "score_query: head out of range");
    contract(attn.n_ops == ops.num_relation_ops() + 1, "score_query: attention width mismatch");
    const std::int64_t n = ops.num_entities;
    std::vector<double> total(static_cast<std::size_t>(n), 0.0);
    std::vector<double> u, next;
    for (std::int64_t j = 0; j < attn.rank; ++j) {
        u.assign(static_cast<std::size_t>(n), 0.0);
        u[static_cast<std::size_t>(h)] = 1.0;
        for (std::int64_t l = 0; l < attn.length; ++l) {
            next.assign(static_cast<std::size_t>(n), 0.0);
            const double a0 = attn.at(j, l, 0);
            for (std::int64_t e = 0; e < n; ++e) {
                const double ue = u[static_cast<std::size_t>(e)];
                if (ue == 0.0) continue;
                if (a0 != 0.0) next[static_cast<std::size_t>(e)] += a0 * ue;
                for (std::int64_t k = 1; k < attn.n_ops; ++k) {
                    const double ak = attn.at(j, l, k);
                    if (ak == 0.0) continue;
                    const SparseOperator& op = ops.ops[static_cast<std::size_t>(k)];
                    const bool unit = op.weights.empty();
                    const double coeff = ak * ue;
                    for (std::int64_t p = op.row_ptr[static_cast<std::size_t>(e)];
                         p < op.row_ptr[static_cast<std::size_t>(e) + 1]; ++p) {
                        const EntityId col = op.cols[static_cast<std::size_t>(p)];
                        if (excl.drops(op.rel, static_cast<EntityId>(e), col)) continue;
                        next[static_cast<std::size_t>(col)] +=
                            coeff * (unit ? 1.0 : op.weights[static_cast<std::size_t>(p)]);
                    }
                }
            }
            u.swap(next);
            if (hp_.normalize_states) {
                double s = 0.0;
                for (double x : u) s += std::abs(x);
                if (s > 1.0 || (hp_.normalize_full && s > 0.0))
                    for (double& x : u) x /= s;
            }
        }
        for (std::int64_t e = 0; e < n; ++e) total[static_cast<std::size_t>(e)] += u[static_cast<std::size_t>(e)];
    }
    return total;
}

OperatorSet build_degre_operators(const OperatorSet& tensorlog_ops,
                                  std::span<const std::int32_t> entity_signature,
                                  const ad::Mat& rho_by_signature) {
    contract(static_cast<std::int64_t>(entity_signature.size()) == tensorlog_ops.num_entities,
             "build_degre_operators: signature map size");
    contract(rho_by_signature.cols() == tensorlog_ops.num_relation_ops(),
             "build_degre_operators: rho width");
    OperatorSet out = tensorlog_ops;  // identity stays unit at slot 0
    for (std::int64_t k = 1; k <= tensorlog_ops.num_relation_ops(); ++k) {
        SparseOperator& op = out.ops[static_cast<std::size_t>(k)];
        contract(op.weights.empty(), "build_degre_operators: expected 0/1 operators");
        op.weights.resize(static_cast<std::size_t>(op.nnz()));
        for (std::int64_t e = 0; e < op.n; ++e) {
            const std::int32_t sig = entity_signature[static_cast<std::size_t>(e)];
            const double w = rho_by_signature(sig, k - 1);
            for (std::int64_t p = op.row_ptr[static_cast<std::size_t>(e)];
                 p < op.row_ptr[static_cast<std::size_t>(e) + 1]; ++p)
                op.weights[static_cast<std::size_t>(p)] = w;
        }
    }
    return out;
}

}  // namespace kgr
