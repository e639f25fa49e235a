#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gqakit/convert.hpp"

namespace gqakit {

enum class TaskKind { MarkovOrder2, FixedOffsetCopy };

struct TaskSpec {
    std::string kind; // "markov" | "copy"
    std::uint64_t seed = 0;
    std::size_t vocab = 0;
    std::size_t seq_len = 0;
    std::size_t copy_offset = 0; // copy task only
};

/// Reproducible synthetic next-token task. The Markov variant draws an
/// order-2 transition table from the seed with skewed rows, so its
/// conditional entropy sits well below ln(vocab); the copy variant repeats
/// the token from `offset` positions back.
class SyntheticTask {
  public:
    static SyntheticTask markov(std::uint64_t seed, std::size_t vocab, std::size_t seq_len) {
        SyntheticTask t;
        t.kind_ = TaskKind::MarkovOrder2;
        t.seed_ = seed;
        t.vocab_ = vocab;
        t.seq_len_ = seq_len;
        t.build_table();
        return t;
    }

    static SyntheticTask copy(std::uint64_t seed, std::size_t vocab, std::size_t seq_len,
                              std::size_t offset = 4) {
        if (offset == 0 || offset >= seq_len)
            throw ArgumentError("copy task: offset must be in [1, seq_len)");
        SyntheticTask t;
        t.kind_ = TaskKind::FixedOffsetCopy;
        t.seed_ = seed;
        t.vocab_ = vocab;
        t.seq_len_ = seq_len;
        t.offset_ = offset;
        return t;
    }

    static SyntheticTask from_spec(const TaskSpec& s) {
        if (s.kind == "markov") return markov(s.seed, s.vocab, s.seq_len);
        if (s.kind == "copy") return copy(s.seed, s.vocab, s.seq_len, s.copy_offset);
        throw ArgumentError("unknown task kind '" + s.kind + "'");
    }

    TaskSpec spec() const {
        return {kind_ == TaskKind::MarkovOrder2 ? "markov" : "copy", seed_, vocab_, seq_len_,
                offset_};
    }

    TaskKind kind() const { return kind_; }
    std::size_t vocab() const { return vocab_; }
    std::size_t seq_len() const { return seq_len_; }
    std::uint64_t seed() const { return seed_; }

    std::vector<int> sample_sequence(Rng& rng) const {
        std::vector<int> seq(seq_len_);
        if (kind_ == TaskKind::MarkovOrder2) {
            for (std::size_t t = 0; t < std::min<std::size_t>(2, seq_len_); ++t)
                seq[t] = static_cast<int>(rng.next_below(vocab_));
            for (std::size_t t = 2; t < seq_len_; ++t) {
                const double* row = trans_row(seq[t - 2], seq[t - 1]);
                double u = rng.next_double();
                std::size_t c = 0;
                while (c + 1 < vocab_ && u >= row[c]) {
                    u -= row[c];
                    ++c;
                }
                seq[t] = static_cast<int>(c);
            }
        } else {
            for (std::size_t t = 0; t < offset_; ++t)
                seq[t] = static_cast<int>(rng.next_below(vocab_));
            for (std::size_t t = offset_; t < seq_len_; ++t) seq[t] = seq[t - offset_];
        }
        return seq;
    }

    std::vector<std::vector<int>> sample_batch(std::size_t n, Rng& rng) const {
        std::vector<std::vector<int>> batch;
        batch.reserve(n);
        for (std::size_t i = 0; i < n; ++i) batch.push_back(sample_sequence(rng));
        return batch;
    }

    /// Mean -ln p(next | context) of the generating process itself: the loss
    /// of the optimal predictor on this data.
    double ideal_loss(std::span<const std::vector<int>> batch) const {
        double sum = 0;
        std::size_t n = 0;
        for (const auto& seq : batch) {
            for (std::size_t t = 1; t < seq.size(); ++t) {
                double p;
                if (kind_ == TaskKind::MarkovOrder2)
                    p = t < 2 ? 1.0 / static_cast<double>(vocab_)
                              : trans_row(seq[t - 2], seq[t - 1])[seq[t]];
                else
                    p = t < offset_ ? 1.0 / static_cast<double>(vocab_) : 1.0;
                sum += -std::log(p);
                ++n;
            }
        }
        return sum / static_cast<double>(n);
    }

  private:
    void build_table() {
        // Sharp order-1 backbone modulated per (prev2, prev1) context. The
        // backbone keeps H(next | prev1) well below ln(vocab) so the chain
        // stays learnable after marginalizing the second-order context; the
        // modulation keeps it genuinely order-2.
        Rng rng = Rng(seed_).child(0x7AB1E);
        std::vector<double> backbone(vocab_ * vocab_);
        for (std::size_t b = 0; b < vocab_; ++b) {
            double sum = 0;
            for (std::size_t c = 0; c < vocab_; ++c) {
                double u = rng.next_double();
                u = u * u;
                backbone[b * vocab_ + c] = u * u * u * u + 1e-4; // u^8
                sum += backbone[b * vocab_ + c];
            }
            for (std::size_t c = 0; c < vocab_; ++c) backbone[b * vocab_ + c] /= sum;
        }
        trans_.assign(vocab_ * vocab_ * vocab_, 0.0);
        for (std::size_t a = 0; a < vocab_; ++a)
            for (std::size_t b = 0; b < vocab_; ++b) {
                double* row = trans_.data() + (a * vocab_ + b) * vocab_;
                double sum = 0;
                for (std::size_t c = 0; c < vocab_; ++c) {
                    const double u = rng.next_double();
                    row[c] = backbone[b * vocab_ + c] * (0.35 + u * u);
                    sum += row[c];
                }
                for (std::size_t c = 0; c < vocab_; ++c) row[c] /= sum;
            }
    }

    const double* trans_row(int a, int b) const {
        return trans_.data() +
               (static_cast<std::size_t>(a) * vocab_ + static_cast<std::size_t>(b)) * vocab_;
    }

    TaskKind kind_ = TaskKind::MarkovOrder2;
    std::uint64_t seed_ = 0;
    std::size_t vocab_ = 0;
    std::size_t seq_len_ = 0;
    std::size_t offset_ = 0;
    std::vector<double> trans_;
};

namespace detail {

template <typename Real>
void add_col_block(Tensor<Real>& dst, std::size_t c0, const Tensor<Real>& block) {
    for (std::size_t i = 0; i < dst.rows(); ++i)
        for (std::size_t j = 0; j < block.cols(); ++j) dst(i, c0 + j) += block(i, j);
}

template <typename Real>
Checkpoint<Real> zero_like(const Checkpoint<Real>& ckpt) {
    Checkpoint<Real> z;
    z.config = ckpt.config;
    z.embedding = Tensor<Real>(ckpt.embedding.shape());
    z.layers.resize(ckpt.layers.size());
    for (std::size_t l = 0; l < ckpt.layers.size(); ++l) {
        z.layers[l].wq = Tensor<Real>(ckpt.layers[l].wq.shape());
        z.layers[l].wk = Tensor<Real>(ckpt.layers[l].wk.shape());
        z.layers[l].wv = Tensor<Real>(ckpt.layers[l].wv.shape());
        z.layers[l].wo = Tensor<Real>(ckpt.layers[l].wo.shape());
    }
    z.unembedding = Tensor<Real>(ckpt.unembedding.shape());
    return z;
}

} // namespace detail

/// Mean next-token cross-entropy of a forward pass, accumulated at double.
template <typename Real>
double batch_loss(const Checkpoint<Real>& ckpt, const std::vector<std::vector<int>>& batch) {
    if (batch.empty()) throw ArgumentError("loss: empty batch");
    double sum = 0;
    std::size_t n = 0;
    for (const auto& seq : batch) {
        if (seq.size() < 2) throw ArgumentError("loss: sequences must have length >= 2");
        Tensor<Real> logits = model_forward(ckpt, seq);
        for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
            auto row = logits.row(t);
            Real mx = row[0];
            for (Real v : row) mx = std::max(mx, v);
            Real z = 0;
            for (Real v : row) z += std::exp(v - mx);
            sum += static_cast<double>(mx) + std::log(static_cast<double>(z)) -
                   static_cast<double>(row[static_cast<std::size_t>(seq[t + 1])]);
            ++n;
        }
    }
    return sum / static_cast<double>(n);
}

template <typename Real>
struct LossAndGrads {
    double loss = 0;
    Checkpoint<Real> grads; // shape-congruent with the model checkpoint
};

/// Forward + hand-written reverse pass through embed, the attention/residual
/// stack and the unembedding, for mean next-token cross-entropy.
template <typename Real>
LossAndGrads<Real> loss_and_grads(const Checkpoint<Real>& ckpt,
                                  const std::vector<std::vector<int>>& batch) {
    if (batch.empty()) throw ArgumentError("loss_and_grads: empty batch");
    const AttentionConfig& cfg = ckpt.config;
    const std::size_t hd = cfg.head_dim;
    const Real inv_sqrt_d = Real(1) / static_cast<Real>(std::sqrt(double(hd)));

    LossAndGrads<Real> out;
    out.grads = detail::zero_like(ckpt);

    std::size_t positions = 0;
    for (const auto& seq : batch) {
        if (seq.size() < 2) throw ArgumentError("loss_and_grads: sequences need length >= 2");
        positions += seq.size() - 1;
    }
    const Real inv_n = Real(1) / static_cast<Real>(positions);

    double loss_sum = 0;
    for (const auto& seq : batch) {
        const std::size_t T = seq.size();

        // Forward, keeping what the backward pass needs.
        struct LayerTrace {
            Tensor<Real> x, q, k, v, heads;
            std::vector<Tensor<Real>> probs; // per head, [T x T] causally masked
        };
        std::vector<LayerTrace> traces(cfg.n_layers);

        Tensor<Real> h({T, cfg.d_model});
        for (std::size_t t = 0; t < T; ++t) {
            if (seq[t] < 0 || static_cast<std::size_t>(seq[t]) >= cfg.vocab)
                throw ArgumentError("loss_and_grads: token out of range");
            auto src = ckpt.embedding.row(static_cast<std::size_t>(seq[t]));
            std::copy(src.begin(), src.end(), h.row(t).begin());
        }
        for (std::size_t l = 0; l < cfg.n_layers; ++l) {
            const LayerWeights<Real>& w = ckpt.layers[l];
            LayerTrace& tr = traces[l];
            tr.x = h;
            tr.q = matmul(h, w.wq);
            tr.k = matmul(h, w.wk);
            tr.v = matmul(h, w.wv);
            tr.heads = Tensor<Real>({T, cfg.q_width()});
            tr.probs.reserve(cfg.n_heads);
            for (std::size_t head = 0; head < cfg.n_heads; ++head) {
                const std::size_t g = group_of_head(head, cfg);
                Tensor<Real> qh = tr.q.col_block(head * hd, hd);
                Tensor<Real> kg = tr.k.col_block(g * hd, hd);
                Tensor<Real> probs = detail::head_probs(qh, kg, cfg.causal, 0);
                tr.heads.set_col_block(head * hd,
                                       matmul(probs, tr.v.col_block(g * hd, hd)));
                tr.probs.push_back(std::move(probs));
            }
            add_inplace(h, matmul(tr.heads, w.wo));
        }
        Tensor<Real> logits = matmul(h, ckpt.unembedding);

        // Cross-entropy and dlogits in one pass; the last position has no target.
        Tensor<Real> dlogits({T, cfg.vocab});
        for (std::size_t t = 0; t + 1 < T; ++t) {
            auto row = logits.row(t);
            auto drow = dlogits.row(t);
            Real mx = row[0];
            for (Real v : row) mx = std::max(mx, v);
            Real z = 0;
            for (std::size_t j = 0; j < cfg.vocab; ++j) {
                drow[j] = std::exp(row[j] - mx);
                z += drow[j];
            }
            const auto target = static_cast<std::size_t>(seq[t + 1]);
            loss_sum += static_cast<double>(mx) + std::log(static_cast<double>(z)) -
                        static_cast<double>(row[target]);
            for (std::size_t j = 0; j < cfg.vocab; ++j) drow[j] = drow[j] / z * inv_n;
            drow[target] -= inv_n;
        }

        // Backward.
        add_inplace(out.grads.unembedding, matmul_tn(h, dlogits));
        Tensor<Real> dh = matmul_nt(dlogits, ckpt.unembedding);

        for (std::size_t l = cfg.n_layers; l-- > 0;) {
            const LayerWeights<Real>& w = ckpt.layers[l];
            LayerTrace& tr = traces[l];

            add_inplace(out.grads.layers[l].wo, matmul_tn(tr.heads, dh));
            Tensor<Real> dheads = matmul_nt(dh, w.wo);

            Tensor<Real> dq({T, cfg.q_width()});
            Tensor<Real> dk({T, cfg.kv_width()});
            Tensor<Real> dv({T, cfg.kv_width()});
            for (std::size_t head = 0; head < cfg.n_heads; ++head) {
                const std::size_t g = group_of_head(head, cfg);
                const Tensor<Real>& probs = tr.probs[head];
                Tensor<Real> d_out = dheads.col_block(head * hd, hd);

                Tensor<Real> dprobs = matmul_nt(d_out, tr.v.col_block(g * hd, hd));
                detail::add_col_block(dv, g * hd, matmul_tn(probs, d_out));

                // Softmax backward; masked entries have probs == 0 so their
                // score gradient vanishes.
                Tensor<Real> dscores({T, T});
                for (std::size_t i = 0; i < T; ++i) {
                    Real dot = 0;
                    for (std::size_t j = 0; j < T; ++j) dot += dprobs(i, j) * probs(i, j);
                    for (std::size_t j = 0; j < T; ++j)
                        dscores(i, j) = probs(i, j) * (dprobs(i, j) - dot) * inv_sqrt_d;
                }

                detail::add_col_block(dq, head * hd,
                                      matmul(dscores, tr.k.col_block(g * hd, hd)));
                detail::add_col_block(dk, g * hd,
                                      matmul_tn(dscores, tr.q.col_block(head * hd, hd)));
            }

            add_inplace(out.grads.layers[l].wq, matmul_tn(tr.x, dq));
            add_inplace(out.grads.layers[l].wk, matmul_tn(tr.x, dk));
            add_inplace(out.grads.layers[l].wv, matmul_tn(tr.x, dv));

            Tensor<Real> dx = matmul_nt(dq, w.wq);
            add_inplace(dx, matmul_nt(dk, w.wk));
            add_inplace(dx, matmul_nt(dv, w.wv));
            add_inplace(dh, dx);
        }

        for (std::size_t t = 0; t < T; ++t) {
            auto dst = out.grads.embedding.row(static_cast<std::size_t>(seq[t]));
            auto src = dh.row(t);
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    }

    out.loss = loss_sum / static_cast<double>(positions);
    if (!std::isfinite(out.loss)) throw NumericError("loss is non-finite");
    return out;
}

/// w <- w - lr * g, elementwise over every weight matrix.
template <typename Real>
void sgd_step(Checkpoint<Real>& ckpt, const Checkpoint<Real>& grads, double lr) {
    auto apply = [lr](Tensor<Real>& w, const Tensor<Real>& g) {
        if (!w.same_shape(g)) throw DimensionError("sgd_step: gradient shape mismatch");
        auto wd = w.data();
        auto gd = g.data();
        for (std::size_t i = 0; i < wd.size(); ++i)
            wd[i] -= static_cast<Real>(lr) * gd[i];
    };
    apply(ckpt.embedding, grads.embedding);
    for (std::size_t l = 0; l < ckpt.layers.size(); ++l) {
        apply(ckpt.layers[l].wq, grads.layers[l].wq);
        apply(ckpt.layers[l].wk, grads.layers[l].wk);
        apply(ckpt.layers[l].wv, grads.layers[l].wv);
        apply(ckpt.layers[l].wo, grads.layers[l].wo);
    }
    apply(ckpt.unembedding, grads.unembedding);
}

inline constexpr std::uint64_t kEvalStream = 0xE7A1;

/// Held-out eval loss on a fixed stream derived from the task seed.
template <typename Real>
double eval_loss(const Checkpoint<Real>& ckpt, const SyntheticTask& task,
                 std::size_t n_sequences = 32) {
    Rng rng = Rng(task.seed()).child(kEvalStream);
    return batch_loss(ckpt, task.sample_batch(n_sequences, rng));
}

struct TrainConfig {
    std::size_t steps = 2000;
    double learning_rate = 0.25;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
    std::size_t eval_sequences = 32;
};

struct EvalPoint {
    double alpha = 0;
    std::size_t step = 0;
    double eval_loss = 0;
};

struct TrainRun {
    std::string base_id;  // empty for pretraining runs
    std::string method;   // conversion method name, empty for pretraining
    double alpha = 1.0;   // uptraining proportion of the base budget
    double learning_rate = 0;
    std::size_t batch_size = 0;
    std::uint64_t seed = 0;
    std::size_t base_steps = 0; // the budget alpha multiplies
    std::size_t steps = 0;      // executed steps == loss_trajectory.size()
    std::size_t eval_sequences = 0;
    TaskSpec task;
    std::vector<double> loss_trajectory;
    std::vector<EvalPoint> eval_points;
    double final_eval_loss = 0;
    double max_loss_spike = 0; // largest single-step loss increase
    std::size_t divergence_retries = 0;
};

namespace detail {

inline double max_spike(const std::vector<double>& traj) {
    double spike = 0;
    for (std::size_t i = 1; i < traj.size(); ++i)
        spike = std::max(spike, traj[i] - traj[i - 1]);
    return spike;
}

/// SGD on fresh batches drawn per step from the run's data stream. The
/// recorded trajectory is the post-step loss on the run's frozen probe batch,
/// so it depends only on the model (constant under lr = 0). Global step
/// indices key the data stream: training to step N visits exactly the same
/// batches as a longer run's first N steps. Throws TrainingError with the
/// partial trajectory when the loss goes non-finite.
template <typename Real>
void train_steps(Checkpoint<Real>& ckpt, const SyntheticTask& task, std::size_t first_step,
                 std::size_t n_steps, double lr, std::size_t batch_size, const Rng& data_root,
                 const std::vector<std::vector<int>>& probe, std::vector<double>& trajectory) {
    for (std::size_t step = first_step; step < first_step + n_steps; ++step) {
        try {
            Rng step_rng = data_root.child(step);
            auto lg = loss_and_grads(ckpt, task.sample_batch(batch_size, step_rng));
            sgd_step(ckpt, lg.grads, lr);
            trajectory.push_back(batch_loss(ckpt, probe));
        } catch (const NumericError& e) {
            throw TrainingError(e.what(), trajectory.size(), trajectory);
        }
    }
}

} // namespace detail

template <typename Real>
struct PretrainResult {
    Checkpoint<Real> ckpt;
    TrainRun run;
};

/// Trains a fresh MHA (G = H) checkpoint on the task; this run's step count
/// is the budget uptraining proportions multiply.
template <typename Real>
PretrainResult<Real> pretrain_base(const AttentionConfig& config, const SyntheticTask& task,
                                   const TrainConfig& tc) {
    config.validate();
    if (config.n_kv_groups != config.n_heads)
        throw ArgumentError("pretrain: base model must be MHA (G == H)");
    if (config.vocab != task.vocab())
        throw ArgumentError("pretrain: config vocab != task vocab");
    if (tc.steps == 0) throw ArgumentError("pretrain: steps must be >= 1");

    PretrainResult<Real> out;
    out.ckpt = random_checkpoint<Real>(config, Rng(tc.seed).child(1).seed());
    out.run.alpha = 1.0;
    out.run.learning_rate = tc.learning_rate;
    out.run.batch_size = tc.batch_size;
    out.run.seed = tc.seed;
    out.run.base_steps = tc.steps;
    out.run.steps = tc.steps;
    out.run.eval_sequences = tc.eval_sequences;
    out.run.task = task.spec();

    Rng probe_rng = Rng(tc.seed).child(3);
    const auto probe = task.sample_batch(tc.batch_size, probe_rng);
    detail::train_steps(out.ckpt, task, 0, tc.steps, tc.learning_rate, tc.batch_size,
                        Rng(tc.seed).child(2), probe, out.run.loss_trajectory);
    out.run.max_loss_spike = detail::max_spike(out.run.loss_trajectory);
    out.run.final_eval_loss = eval_loss(out.ckpt, task, tc.eval_sequences);
    return out;
}

template <typename Real>
struct UptrainResult {
    Checkpoint<Real> ckpt;
    TrainRun run;
};

/// Converts the base to G_tgt groups with `method`, then continues training
/// for round(alpha * base budget) steps with the base run's task and
/// optimizer settings. Eval loss is recorded at the alpha grid {0, 0.05,
/// 0.10} where the budget covers it, plus the final step. Diverging runs are
/// retried on a child seed (up to 2 retries) and the retry count recorded.
template <typename Real>
UptrainResult<Real> uptrain(const Checkpoint<Real>& base, const TrainRun& base_run,
                            std::size_t g_tgt, const ConversionMethod& method, double alpha,
                            std::uint64_t seed, const std::string& base_id = "") {
    if (alpha < 0.0 || alpha > 1.0) throw ArgumentError("uptrain: alpha must be in [0, 1]");
    if (base.config.n_kv_groups != base.config.n_heads)
        throw ArgumentError("uptrain: base checkpoint must be MHA (G == H)");

    const SyntheticTask task = SyntheticTask::from_spec(base_run.task);
    const std::size_t budget =
        static_cast<std::size_t>(std::llround(alpha * static_cast<double>(base_run.base_steps)));

    std::vector<std::pair<double, std::size_t>> grid = {{0.0, 0}};
    for (double g : {0.05, 0.10}) {
        const auto s = static_cast<std::size_t>(
            std::llround(g * static_cast<double>(base_run.base_steps)));
        if (s >= 1 && s <= budget) grid.emplace_back(g, s);
    }
    if (budget > 0 && grid.back().second != budget) grid.emplace_back(alpha, budget);
    // Tiny budgets can round two grid alphas onto one step; keep the later label.
    for (std::size_t i = 1; i < grid.size();) {
        if (grid[i].second == grid[i - 1].second) {
            grid[i - 1] = grid[i];
            grid.erase(grid.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            ++i;
        }
    }

    UptrainResult<Real> out;
    out.run.base_id = base_id;
    out.run.method = method.name();
    out.run.alpha = alpha;
    out.run.learning_rate = base_run.learning_rate;
    out.run.batch_size = base_run.batch_size;
    out.run.seed = seed;
    out.run.base_steps = base_run.base_steps;
    out.run.steps = budget;
    out.run.eval_sequences = base_run.eval_sequences;
    out.run.task = base_run.task;

    const Checkpoint<Real> converted = convert_checkpoint(base, g_tgt, method);

    for (std::size_t attempt = 0;; ++attempt) {
        out.ckpt = converted;
        out.run.loss_trajectory.clear();
        out.run.eval_points.clear();
        Rng data_root = Rng(seed).child(100 + attempt);
        Rng probe_rng = Rng(seed).child(200 + attempt);
        const auto probe = task.sample_batch(out.run.batch_size, probe_rng);
        try {
            std::size_t done = 0;
            for (const auto& [a, s] : grid) {
                if (s > done) {
                    detail::train_steps(out.ckpt, task, done, s - done, out.run.learning_rate,
                                        out.run.batch_size, data_root, probe,
                                        out.run.loss_trajectory);
                    done = s;
                }
                out.run.eval_points.push_back(
                    {a, s, eval_loss(out.ckpt, task, out.run.eval_sequences)});
            }
            break;
        } catch (const TrainingError&) {
            if (attempt >= 2) throw;
            ++out.run.divergence_retries;
        }
    }

    out.run.max_loss_spike = detail::max_spike(out.run.loss_trajectory);
    out.run.final_eval_loss = out.run.eval_points.back().eval_loss;
    return out;
}

} // namespace gqakit
