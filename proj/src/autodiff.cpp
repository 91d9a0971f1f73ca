#include "kgr/autodiff.hpp"

#include <atomic>
#include <cmath>
#include <memory>

#include "kgr/parallel.hpp"

namespace kgr::ad {

namespace {

void check_finite(const Mat& m, const char* op) {
    if (!m.allFinite()) throw NumericFault(std::string("non-finite value produced by ") + op);
}

// Deterministic threaded GEMM: fixed row-chunk grid, each chunk a plain
// single-threaded Eigen product.
Mat gemm(const Mat& a, const Mat& b, bool at, bool bt) {
    const std::int64_t m = at ? a.cols() : a.rows();
    const std::int64_t k = at ? a.rows() : a.cols();
    const std::int64_t n = bt ? b.rows() : b.cols();
    contract(k == (bt ? b.cols() : b.rows()), "matmul: inner dimension mismatch");
    Mat out(m, n);
    auto block = [&](std::int64_t r0, std::int64_t r1) {
        auto dst = out.middleRows(r0, r1 - r0);
        if (!at && !bt)
            dst.noalias() = a.middleRows(r0, r1 - r0) * b;
        else if (!at && bt)
            dst.noalias() = a.middleRows(r0, r1 - r0) * b.transpose();
        else if (at && !bt)
            dst.noalias() = a.middleCols(r0, r1 - r0).transpose() * b;
        else
            dst.noalias() = a.middleCols(r0, r1 - r0).transpose() * b.transpose();
    };
    if (m * n * k < (1 << 16) || worker_count() == 1)
        block(0, m);
    else
        parallel_chunks(m, block);
    return out;
}

}  // namespace

TensorRef Tape::leaf(Mat value) { return push(std::move(value), nullptr, "leaf"); }

TensorRef Tape::push(Mat value, BackFn back, const char* name) {
    check_finite(value, name);
    Node n;
    n.val = std::move(value);
    n.back = std::move(back);
    n.name = name;
    nodes_.push_back(std::move(n));
    return TensorRef{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Mat& Tape::grad(TensorRef t) {
    Node& n = nodes_[check(t)];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.val.rows(), n.val.cols());
    return n.grad;
}

void Tape::backward(TensorRef seed) {
    const std::size_t s = check(seed);
    contract(nodes_[s].val.size() == 1, "backward seed must be scalar");
    grad(seed)(0, 0) = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (n.grad.size() == 0 || !n.back) continue;
        n.back(*this, TensorRef{static_cast<std::int32_t>(i)});
    }
}

void Tape::zero_grads() {
    for (Node& n : nodes_) n.grad.resize(0, 0);
}

TensorRef matmul(Tape& t, TensorRef a, TensorRef b) {
    Mat out = gemm(t.value(a), t.value(b), false, false);
    return t.push(std::move(out),
                  [a, b](Tape& tp, TensorRef self) {
                      const Mat& g = tp.grad(self);
                      tp.grad(a).noalias() += gemm(g, tp.value(b), false, true);
                      tp.grad(b).noalias() += gemm(tp.value(a), g, true, false);
                  },
                  "matmul");
}

TensorRef matmul_nt(Tape& t, TensorRef a, TensorRef b) {
    Mat out = gemm(t.value(a), t.value(b), false, true);
    return t.push(std::move(out),
                  [a, b](Tape& tp, TensorRef self) {
                      const Mat& g = tp.grad(self);
                      tp.grad(a).noalias() += gemm(g, tp.value(b), false, false);
                      tp.grad(b).noalias() += gemm(g, tp.value(a), true, false);
                  },
                  "matmul_nt");
}

TensorRef add(Tape& t, TensorRef a, TensorRef b) {
    contract(t.value(a).rows() == t.value(b).rows() && t.value(a).cols() == t.value(b).cols(),
             "add: shape mismatch");
    return t.push(t.value(a) + t.value(b),
                  [a, b](Tape& tp, TensorRef self) {
                      const Mat& g = tp.grad(self);
                      tp.grad(a) += g;
                      tp.grad(b) += g;
                  },
                  "add");
}

TensorRef add_rowvec(Tape& t, TensorRef a, TensorRef bias) {
    const Mat& av = t.value(a);
    const Mat& bv = t.value(bias);
    contract(bv.rows() == 1 && bv.cols() == av.cols(), "add_rowvec: bias shape mismatch");
    Mat out = av;
    out.rowwise() += bv.row(0);
    return t.push(std::move(out),
                  [a, bias](Tape& tp, TensorRef self) {
                      const Mat& g = tp.grad(self);
                      tp.grad(a) += g;
                      tp.grad(bias).row(0) += g.colwise().sum();
                  },
                  "add_rowvec");
}

TensorRef mul(Tape& t, TensorRef a, TensorRef b) {
    contract(t.value(a).rows() == t.value(b).rows() && t.value(a).cols() == t.value(b).cols(),
             "mul: shape mismatch");
    return t.push(t.value(a).cwiseProduct(t.value(b)),
                  [a, b](Tape& tp, TensorRef self) {
                      const Mat& g = tp.grad(self);
                      tp.grad(a) += g.cwiseProduct(tp.value(b));
                      tp.grad(b) += g.cwiseProduct(tp.value(a));
                  },
                  "mul");
}

TensorRef scale(Tape& t, TensorRef a, double c) {
    return t.push(t.value(a) * c,
                  [a, c](Tape& tp, TensorRef self) { tp.grad(a) += tp.grad(self) * c; },
                  "scale");
}

TensorRef concat_cols(Tape& t, TensorRef a, TensorRef b) {
    const Mat& av = t.value(a);
    const Mat& bv = t.value(b);
    contract(av.rows() == bv.rows(), "concat_cols: row mismatch");
    Mat out(av.rows(), av.cols() + bv.cols());
    out.leftCols(av.cols()) = av;
    out.rightCols(bv.cols()) = bv;
    return t.push(std::move(out),
                  [a, b](Tape& tp, TensorRef self) {
                      const Mat& g = tp.grad(self);
                      const auto ac = tp.value(a).cols();
                      tp.grad(a) += g.leftCols(ac);
                      tp.grad(b) += g.rightCols(g.cols() - ac);
                  },
                  "concat_cols");
}

TensorRef concat_rows(Tape& t, std::span<const TensorRef> parts) {
    contract(!parts.empty(), "concat_rows: empty");
    std::int64_t rows = 0;
    const std::int64_t cols = t.value(parts[0]).cols();
    for (TensorRef p : parts) {
        contract(t.value(p).cols() == cols, "concat_rows: col mismatch");
        rows += t.value(p).rows();
    }
    Mat out(rows, cols);
    std::int64_t r = 0;
    for (TensorRef p : parts) {
        out.middleRows(r, t.value(p).rows()) = t.value(p);
        r += t.value(p).rows();
    }
    std::vector<TensorRef> own(parts.begin(), parts.end());
    return t.push(std::move(out),
                  [own](Tape& tp, TensorRef self) {
                      const Mat& g = tp.grad(self);
                      std::int64_t r = 0;
                      for (TensorRef p : own) {
                          const auto pr = tp.value(p).rows();
                          tp.grad(p) += g.middleRows(r, pr);
                          r += pr;
                      }
                  },
                  "concat_rows");
}

TensorRef slice_cols(Tape& t, TensorRef a, std::int64_t begin, std::int64_t len) {
    const Mat& av = t.value(a);
    contract(begin >= 0 && begin + len <= av.cols(), "slice_cols: out of range");
    return t.push(av.middleCols(begin, len),
                  [a, begin, len](Tape& tp, TensorRef self) {
                      tp.grad(a).middleCols(begin, len) += tp.grad(self);
                  },
                  "slice_cols");
}

TensorRef sigmoid(Tape& t, TensorRef a) {
    Mat out = t.value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    return t.push(std::move(out),
                  [a](Tape& tp, TensorRef self) {
                      const Mat& y = tp.value(self);
                      tp.grad(a) += tp.grad(self).cwiseProduct(
                          y.cwiseProduct(Mat::Ones(y.rows(), y.cols()) - y));
                  },
                  "sigmoid");
}

TensorRef tanh_op(Tape& t, TensorRef a) {
    Mat out = t.value(a).unaryExpr([](double x) { return std::tanh(x); });
    return t.push(std::move(out),
                  [a](Tape& tp, TensorRef self) {
                      const Mat& y = tp.value(self);
                      tp.grad(a) += tp.grad(self).cwiseProduct(
                          Mat::Ones(y.rows(), y.cols()) - y.cwiseProduct(y));
                  },
                  "tanh");
}

TensorRef softmax_rows(Tape& t, TensorRef a) {
    Mat out = t.value(a);
    for (std::int64_t r = 0; r < out.rows(); ++r) {
        const double mx = out.row(r).maxCoeff();
        out.row(r) = (out.row(r).array() - mx).exp();
        out.row(r) /= out.row(r).sum();
    }
    return t.push(std::move(out),
                  [a](Tape& tp, TensorRef self) {
                      const Mat& y = tp.value(self);
                      const Mat& g = tp.grad(self);
                      Mat& ga = tp.grad(a);
                      for (std::int64_t r = 0; r < y.rows(); ++r) {
                          const double dot = g.row(r).cwiseProduct(y.row(r)).sum();
                          ga.row(r) += (g.row(r).array() - dot).matrix().cwiseProduct(y.row(r));
                      }
                  },
                  "softmax");
}

TensorRef clamp(Tape& t, TensorRef a, double lo, double hi) {
    Mat out = t.value(a).cwiseMax(lo).cwiseMin(hi);
    return t.push(std::move(out),
                  [a, lo, hi](Tape& tp, TensorRef self) {
                      const Mat& x = tp.value(a);
                      const Mat& g = tp.grad(self);
                      Mat& ga = tp.grad(a);
                      for (std::int64_t i = 0; i < x.rows(); ++i)
                          for (std::int64_t j = 0; j < x.cols(); ++j)
                              if (x(i, j) > lo && x(i, j) < hi) ga(i, j) += g(i, j);
                  },
                  "clamp");
}

TensorRef sum_all(Tape& t, TensorRef a) {
    Mat out(1, 1);
    out(0, 0) = t.value(a).sum();
    return t.push(std::move(out),
                  [a](Tape& tp, TensorRef self) {
                      tp.grad(a).array() += tp.grad(self)(0, 0);
                  },
                  "sum");
}

TensorRef embedding_lookup(Tape& t, TensorRef table, std::span<const std::int32_t> rows) {
    const Mat& tb = t.value(table);
    Mat out(static_cast<std::int64_t>(rows.size()), tb.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        contract(rows[i] >= 0 && rows[i] < tb.rows(), "embedding_lookup: row out of range");
        out.row(static_cast<std::int64_t>(i)) = tb.row(rows[i]);
    }
    std::vector<std::int32_t> own(rows.begin(), rows.end());
    return t.push(std::move(out),
                  [table, own](Tape& tp, TensorRef self) {
                      const Mat& g = tp.grad(self);
                      Mat& gt = tp.grad(table);
                      for (std::size_t i = 0; i < own.size(); ++i)
                          gt.row(own[i]) += g.row(static_cast<std::int64_t>(i));
                  },
                  "embedding_lookup");
}

// ---- sparse chain ----------------------------------------------------------

namespace {

struct ChainSaved {
    std::vector<std::vector<EntityId>> support;  // per batch row: entities with u != 0
};

}  // namespace

TensorRef sparse_chain_hop(Tape& t, TensorRef u, TensorRef attn, TensorRef rho,
                           const ChainSpec& spec) {
    contract(spec.ops != nullptr, "sparse_chain_hop: missing operators");
    const OperatorSet& ops = *spec.ops;
    const Mat& uv = t.value(u);
    const Mat& av = t.value(attn);
    const std::int64_t batch = uv.rows();
    const std::int64_t n = ops.num_entities;
    const std::int64_t n_ops = ops.num_relation_ops();
    contract(uv.cols() == n, "sparse_chain_hop: state width != |E|");
    contract(av.rows() == batch && av.cols() == n_ops + 1, "sparse_chain_hop: attention shape");
    contract(static_cast<std::int64_t>(spec.exclusions.size()) == batch,
             "sparse_chain_hop: one exclusion pair per batch row required");
    const Mat* rhov = nullptr;
    if (spec.use_rho) {
        rhov = &t.value(rho);
        contract(rhov->cols() == n_ops, "sparse_chain_hop: rho width != relation op count");
        contract(static_cast<std::int64_t>(spec.entity_rho_row.size()) == n,
                 "sparse_chain_hop: rho row map size");
    }

    auto saved = std::make_shared<ChainSaved>();
    saved->support.resize(static_cast<std::size_t>(batch));

    std::atomic<bool> coverage_gap{false};
    Mat out = Mat::Zero(batch, n);
    parallel_chunks(batch, [&](std::int64_t b0, std::int64_t b1) {
        for (std::int64_t b = b0; b < b1; ++b) {
            auto& supp = saved->support[static_cast<std::size_t>(b)];
            for (std::int64_t e = 0; e < n; ++e)
                if (uv(b, e) != 0.0) supp.push_back(static_cast<EntityId>(e));
            const ExclusionPair& excl = spec.exclusions[static_cast<std::size_t>(b)];
            // k = 0: identity.
            const double a0 = av(b, 0);
            for (EntityId e : supp) out(b, e) += a0 * uv(b, e);
            for (std::int64_t k = 1; k <= n_ops; ++k) {
                const double ak = av(b, k);
                if (ak == 0.0) continue;
                const SparseOperator& op = ops.ops[static_cast<std::size_t>(k)];
                for (EntityId e : supp) {
                    double w = 1.0;
                    if (spec.use_rho) {
                        const std::int32_t rr = spec.entity_rho_row[static_cast<std::size_t>(e)];
                        if (rr < 0) {  // reported after the parallel region
                            coverage_gap.store(true, std::memory_order_relaxed);
                            continue;
                        }
                        w = (*rhov)(rr, k - 1);
                    }
                    const double coeff = ak * uv(b, e) * w;
                    if (coeff == 0.0) continue;
                    for (std::int64_t p = op.row_ptr[static_cast<std::size_t>(e)];
                         p < op.row_ptr[static_cast<std::size_t>(e) + 1]; ++p) {
                        const EntityId j = op.cols[static_cast<std::size_t>(p)];
                        if (excl.drops(op.rel, e, j)) continue;
                        out(b, j) += coeff;
                    }
                }
            }
        }
    });
    contract(!coverage_gap.load(), "sparse_chain_hop: entity outside rho coverage");

    ChainSpec spec_copy = spec;  // exclusions and row map must outlive the tape
    return t.push(
        std::move(out),
        [u, attn, rho, spec_copy, saved](Tape& tp, TensorRef self) {
            const OperatorSet& ops = *spec_copy.ops;
            const Mat& g = tp.grad(self);
            const Mat& uv = tp.value(u);
            const Mat& av = tp.value(attn);
            const std::int64_t batch = uv.rows();
            const std::int64_t n_ops = ops.num_relation_ops();
            const Mat* rhov = spec_copy.use_rho ? &tp.value(rho) : nullptr;

            Mat& gu = tp.grad(u);
            Mat& ga = tp.grad(attn);
            Mat* grho = spec_copy.use_rho ? &tp.grad(rho) : nullptr;

            // Per-chunk rho gradients keep the accumulation race-free and the
            // final ordered reduction deterministic.
            std::vector<Mat> grho_chunks;
            if (spec_copy.use_rho)
                grho_chunks.assign(static_cast<std::size_t>(kParallelChunks),
                                   Mat::Zero(rhov->rows(), rhov->cols()));

            parallel_indexed_chunks(batch, [&](int chunk, std::int64_t b0, std::int64_t b1) {
                for (std::int64_t b = b0; b < b1; ++b) {
                    const auto& supp = saved->support[static_cast<std::size_t>(b)];
                    const ExclusionPair& excl = spec_copy.exclusions[static_cast<std::size_t>(b)];
                    double ga0 = 0.0;
                    for (EntityId e : supp) {
                        ga0 += g(b, e) * uv(b, e);
                        gu(b, e) += av(b, 0) * g(b, e);
                    }
                    ga(b, 0) += ga0;
                    for (std::int64_t k = 1; k <= n_ops; ++k) {
                        const SparseOperator& op = ops.ops[static_cast<std::size_t>(k)];
                        const double ak = av(b, k);
                        double gak = 0.0;
                        for (EntityId e : supp) {
                            double rowsum = 0.0;
                            for (std::int64_t p = op.row_ptr[static_cast<std::size_t>(e)];
                                 p < op.row_ptr[static_cast<std::size_t>(e) + 1]; ++p) {
                                const EntityId j = op.cols[static_cast<std::size_t>(p)];
                                if (excl.drops(op.rel, e, j)) continue;
                                rowsum += g(b, j);
                            }
                            if (rowsum == 0.0) continue;
                            double w = 1.0;
                            std::int32_t rr = -1;
                            if (spec_copy.use_rho) {
                                rr = spec_copy.entity_rho_row[static_cast<std::size_t>(e)];
                                w = (*rhov)(rr, k - 1);
                            }
                            gak += uv(b, e) * w * rowsum;
                            gu(b, e) += ak * w * rowsum;
                            if (spec_copy.use_rho)
                                grho_chunks[static_cast<std::size_t>(chunk)](rr, k - 1) +=
                                    ak * uv(b, e) * rowsum;
                        }
                        ga(b, k) += gak;
                    }
                }
            });
            if (spec_copy.use_rho)
                for (const Mat& m : grho_chunks) *grho += m;
        },
        "sparse_chain");
}

TensorRef l1_cap_rows(Tape& t, TensorRef a, bool cap) {
    const Mat& x = t.value(a);
    Mat out = x;
    Eigen::VectorXd norms(x.rows());
    for (std::int64_t r = 0; r < x.rows(); ++r) {
        const double s = x.row(r).cwiseAbs().sum();
        norms(r) = s;
        if (s > 1.0 || (!cap && s > 0.0)) out.row(r) /= s;
    }
    return t.push(std::move(out),
                  [a, norms, cap](Tape& tp, TensorRef self) {
                      const Mat& g = tp.grad(self);
                      const Mat& x = tp.value(a);
                      Mat& ga = tp.grad(a);
                      for (std::int64_t r = 0; r < x.rows(); ++r) {
                          const double s = norms(r);
                          if (cap ? s <= 1.0 : s == 0.0) {
                              ga.row(r) += g.row(r);
                          } else {
                              // out_i = x_i / s, s = sum_j |x_j|; ds/dx_j = sign(x_j).
                              const double dot = g.row(r).cwiseProduct(x.row(r)).sum();
                              ga.row(r) += g.row(r) / s;
                              ga.row(r) -= (dot / (s * s)) * x.row(r).unaryExpr([](double v) {
                                  return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                              });
                          }
                      }
                  },
                  "l1_cap");
}

TensorRef bce_onehot_mean(Tape& t, TensorRef scores, std::span<const EntityId> targets,
                          double eps) {
    const Mat& s = t.value(scores);
    const std::int64_t batch = s.rows();
    contract(static_cast<std::int64_t>(targets.size()) == batch, "bce: one target per row");
    contract(eps > 0.0 && eps < 0.5, "bce: eps out of range");
    double total = 0.0;
    for (std::int64_t b = 0; b < batch; ++b) {
        contract(targets[b] >= 0 && targets[b] < s.cols(), "bce: target out of range");
        total += bce_onehot_loss(
            std::span<const double>(s.row(b).data(), static_cast<std::size_t>(s.cols())),
            targets[b], eps);
    }
    Mat out(1, 1);
    out(0, 0) = total / static_cast<double>(batch);
    std::vector<EntityId> own(targets.begin(), targets.end());
    return t.push(std::move(out),
                  [scores, own, eps](Tape& tp, TensorRef self) {
                      const double gup = tp.grad(self)(0, 0);
                      const Mat& s = tp.value(scores);
                      Mat& gs = tp.grad(scores);
                      const double inv_b = 1.0 / static_cast<double>(s.rows());
                      for (std::int64_t b = 0; b < s.rows(); ++b) {
                          for (std::int64_t j = 0; j < s.cols(); ++j) {
                              const double x = s(b, j);
                              if (x <= eps || x >= 1.0 - eps) continue;  // clamped flat
                              const double d = (own[static_cast<std::size_t>(b)] == j)
                                                   ? -1.0 / x
                                                   : 1.0 / (1.0 - x);
                              gs(b, j) += gup * inv_b * d;
                          }
                      }
                  },
                  "bce_onehot");
}

double bce_onehot_loss(std::span<const double> s, EntityId target, double eps) {
    double loss = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double x = std::min(std::max(s[i], eps), 1.0 - eps);
        if (static_cast<EntityId>(i) == target)
            loss -= std::log(x);
        else
            loss -= std::log(1.0 - x);
    }
    if (!std::isfinite(loss)) throw NumericFault("bce_onehot_loss produced non-finite value");
    return loss;
}

GradCheck grad_check(const std::function<double()>& f, std::span<double* const> coords,
                     std::span<const double> analytic, double h) {
    contract(coords.size() == analytic.size(), "grad_check: coord/grad count mismatch");
    GradCheck res;
    for (std::size_t i = 0; i < coords.size(); ++i) {
        double* p = coords[i];
        const double orig = *p;
        *p = orig + h;
        const double fp = f();
        *p = orig - h;
        const double fm = f();
        *p = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericFault("grad_check: non-finite objective");
        const double fd = (fp - fm) / (2.0 * h);
        const double ad = analytic[i];
        const double err = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
        res.max_rel_err = std::max(res.max_rel_err, err);
        ++res.n_checked;
    }
    return res;
}

}  // namespace kgr::ad
