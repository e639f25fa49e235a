#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "gqakit/attention.hpp"
#include "gqakit/checkpoint_io.hpp"

namespace gqakit {

/// Stress-configuration context length; callers can pass any other capacity.
inline constexpr std::size_t kDefaultCapacity = 2048;

/// Per-layer, per-group key/value history for incremental decoding.
/// Pre-allocated to capacity with a fill pointer, so byte accounting is exact
/// and generation never reallocates. Single-owner mutable state.
template <typename Real>
class KVCache {
  public:
    KVCache(const AttentionConfig& config, std::size_t capacity)
        : config_(config), capacity_(capacity), filled_(0) {
        config.validate();
        k_.reserve(config.n_layers);
        v_.reserve(config.n_layers);
        for (std::size_t l = 0; l < config.n_layers; ++l) {
            k_.emplace_back(std::vector<std::size_t>{capacity, config.kv_width()});
            v_.emplace_back(std::vector<std::size_t>{capacity, config.kv_width()});
        }
    }

    const AttentionConfig& config() const { return config_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return filled_; }
    Precision precision() const { return precision_of<Real>(); }

    /// 2 * n_layers * T_cur * G * head_dim * bytes_per_element.
    std::uint64_t bytes() const {
        return 2ull * config_.n_layers * filled_ * config_.n_kv_groups * config_.head_dim *
               sizeof(Real);
    }

    /// Stages one position's K/V for a layer at the current fill pointer;
    /// advance() commits the position once every layer is written.
    void stage(std::size_t layer, std::span<const Real> k, std::span<const Real> v) {
        if (filled_ >= capacity_) throw ArgumentError("kv cache: capacity exceeded");
        auto kr = k_[layer].row(filled_);
        auto vr = v_[layer].row(filled_);
        std::copy(k.begin(), k.end(), kr.begin());
        std::copy(v.begin(), v.end(), vr.begin());
    }

    void advance() {
        if (filled_ >= capacity_) throw ArgumentError("kv cache: capacity exceeded");
        ++filled_;
    }

    /// Bulk fill for prefill: rows [0, t.rows()) of layer `layer`.
    void fill_prefix(std::size_t layer, const Tensor<Real>& k, const Tensor<Real>& v) {
        if (k.rows() > capacity_) throw ArgumentError("kv cache: capacity exceeded");
        for (std::size_t i = 0; i < k.rows(); ++i) {
            std::copy(k.row(i).begin(), k.row(i).end(), k_[layer].row(i).begin());
            std::copy(v.row(i).begin(), v.row(i).end(), v_[layer].row(i).begin());
        }
    }

    void advance_to(std::size_t positions) {
        if (positions > capacity_ || positions < filled_)
            throw ArgumentError("kv cache: invalid fill pointer");
        filled_ = positions;
    }

    std::span<const Real> key_row(std::size_t layer, std::size_t pos) const {
        return k_[layer].row(pos);
    }
    std::span<const Real> value_row(std::size_t layer, std::size_t pos) const {
        return v_[layer].row(pos);
    }

  private:
    AttentionConfig config_;
    std::size_t capacity_;
    std::size_t filled_;
    std::vector<Tensor<Real>> k_;
    std::vector<Tensor<Real>> v_;
};

struct DecodeTrace {
    std::vector<int> prompt;
    std::vector<int> tokens;                     // generated ids, greedy
    std::vector<std::uint64_t> step_cache_bytes; // after ingesting each generated token
    std::vector<double> step_seconds;            // per generated token
    std::uint64_t prefill_cache_bytes = 0;
    double prefill_seconds = 0;
    double total_seconds = 0;
};

namespace detail {

/// out[j] = sum_d x[d] * w[d, j]; one-row matmul on raw spans.
template <typename Real>
void vec_matmul(std::span<const Real> x, const Tensor<Real>& w, std::span<Real> out) {
    std::fill(out.begin(), out.end(), Real(0));
    for (std::size_t d = 0; d < x.size(); ++d) {
        const Real xv = x[d];
        auto wr = w.row(d);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += xv * wr[j];
    }
}

template <typename Real>
void require_decodable(const Checkpoint<Real>& ckpt) {
    ckpt.config.validate();
    if (!ckpt.config.causal)
        throw ArgumentError("decode: incremental decoding requires a causal config");
}

inline int argmax_token(std::span<const float> logits) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[best]) best = i;
    return static_cast<int>(best);
}

inline int argmax_token(std::span<const double> logits) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[best]) best = i;
    return static_cast<int>(best);
}

} // namespace detail

template <typename Real>
struct PrefillResult {
    KVCache<Real> cache;
    std::vector<Real> logits; // last position
};

/// Runs the prompt through the stack once, storing every position's K/V.
/// Returned logits equal model_forward's last row: the batched pass applies
/// the same operations in the same order.
template <typename Real>
PrefillResult<Real> prefill(const Checkpoint<Real>& ckpt, std::span<const int> prompt,
                            std::size_t capacity = kDefaultCapacity) {
    detail::require_decodable(ckpt);
    const AttentionConfig& cfg = ckpt.config;
    if (prompt.empty()) throw ArgumentError("prefill: prompt must be non-empty");
    if (prompt.size() > capacity) throw ArgumentError("prefill: prompt exceeds cache capacity");

    KVCache<Real> cache(cfg, capacity);
    const std::size_t hd = cfg.head_dim;

    Tensor<Real> h({prompt.size(), cfg.d_model});
    for (std::size_t t = 0; t < prompt.size(); ++t) {
        if (prompt[t] < 0 || static_cast<std::size_t>(prompt[t]) >= cfg.vocab)
            throw ArgumentError("prefill: token out of range");
        auto src = ckpt.embedding.row(static_cast<std::size_t>(prompt[t]));
        std::copy(src.begin(), src.end(), h.row(t).begin());
    }

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const LayerWeights<Real>& w = ckpt.layers[l];
        Tensor<Real> q = matmul(h, w.wq);
        Tensor<Real> k = matmul(h, w.wk);
        Tensor<Real> v = matmul(h, w.wv);
        cache.fill_prefix(l, k, v);
        Tensor<Real> heads({h.rows(), cfg.q_width()});
        for (std::size_t head = 0; head < cfg.n_heads; ++head) {
            const std::size_t g = group_of_head(head, cfg);
            Tensor<Real> qh = q.col_block(head * hd, hd);
            Tensor<Real> kg = k.col_block(g * hd, hd);
            Tensor<Real> vg = v.col_block(g * hd, hd);
            Tensor<Real> probs = detail::head_probs(qh, kg, cfg.causal, 0);
            heads.set_col_block(head * hd, matmul(probs, vg));
        }
        add_inplace(h, matmul(heads, w.wo));
    }
    cache.advance_to(prompt.size());

    std::vector<Real> logits(cfg.vocab);
    detail::vec_matmul<Real>(h.row(h.rows() - 1), ckpt.unembedding, logits);
    for (Real v : logits)
        if (!std::isfinite(v)) throw NumericError("prefill produced non-finite logits");
    return {std::move(cache), std::move(logits)};
}

/// Ingests one token: appends exactly one position of K/V per layer and
/// returns the logits for the next position. Equal to recomputing the full
/// prefix at this position.
template <typename Real>
std::vector<Real> decode_step(const Checkpoint<Real>& ckpt, KVCache<Real>& cache, int token) {
    detail::require_decodable(ckpt);
    const AttentionConfig& cfg = ckpt.config;
    if (cache.size() >= cache.capacity()) throw ArgumentError("decode: capacity exceeded");
    if (token < 0 || static_cast<std::size_t>(token) >= cfg.vocab)
        throw ArgumentError("decode: token out of range");

    const std::size_t hd = cfg.head_dim;
    const std::size_t t = cache.size(); // this token's position
    const Real inv_sqrt_d = Real(1) / static_cast<Real>(std::sqrt(double(hd)));

    std::vector<Real> x(cfg.d_model);
    {
        auto src = ckpt.embedding.row(static_cast<std::size_t>(token));
        std::copy(src.begin(), src.end(), x.begin());
    }

    std::vector<Real> q(cfg.q_width()), kn(cfg.kv_width()), vn(cfg.kv_width());
    std::vector<Real> heads(cfg.q_width()), y(cfg.d_model), probs(t + 1);

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const LayerWeights<Real>& w = ckpt.layers[l];
        detail::vec_matmul<Real>(x, w.wq, q);
        detail::vec_matmul<Real>(x, w.wk, kn);
        detail::vec_matmul<Real>(x, w.wv, vn);
        cache.stage(l, kn, vn);

        for (std::size_t head = 0; head < cfg.n_heads; ++head) {
            const std::size_t g = head / cfg.heads_per_group();
            const Real* qh = q.data() + head * hd;
            Real mx = -std::numeric_limits<Real>::infinity();
            for (std::size_t j = 0; j <= t; ++j) {
                const Real* kr = cache.key_row(l, j).data() + g * hd;
                Real s = 0;
                for (std::size_t d = 0; d < hd; ++d) s += qh[d] * kr[d];
                s *= inv_sqrt_d;
                probs[j] = s;
                mx = std::max(mx, s);
            }
            Real sum = 0;
            for (std::size_t j = 0; j <= t; ++j) {
                probs[j] = std::exp(probs[j] - mx);
                sum += probs[j];
            }
            for (std::size_t j = 0; j <= t; ++j) probs[j] /= sum;

            Real* out = heads.data() + head * hd;
            std::fill(out, out + hd, Real(0));
            for (std::size_t j = 0; j <= t; ++j) {
                const Real* vr = cache.value_row(l, j).data() + g * hd;
                const Real p = probs[j];
                for (std::size_t d = 0; d < hd; ++d) out[d] += p * vr[d];
            }
        }

        detail::vec_matmul<Real>(heads, w.wo, y);
        for (std::size_t d = 0; d < cfg.d_model; ++d) x[d] += y[d];
    }
    cache.advance();

    std::vector<Real> logits(cfg.vocab);
    detail::vec_matmul<Real>(x, ckpt.unembedding, logits);
    for (Real v : logits)
        if (!std::isfinite(v)) throw NumericError("decode produced non-finite logits");
    return logits;
}

/// Greedy autoregressive generation with timing and cache-byte accounting.
/// Each generated token is ingested back into the cache, so step i's time and
/// byte figures describe exactly one incremental position.
template <typename Real>
DecodeTrace generate(const Checkpoint<Real>& ckpt, std::span<const int> prompt,
                     std::size_t n_steps, bool greedy = true,
                     std::size_t capacity = kDefaultCapacity) {
    if (!greedy) throw ArgumentError("generate: only greedy decoding is supported");
    if (prompt.size() + n_steps > capacity)
        throw ArgumentError("generate: prompt + steps exceed cache capacity");

    using Clock = std::chrono::steady_clock;
    const auto run_start = Clock::now();

    DecodeTrace trace;
    trace.prompt.assign(prompt.begin(), prompt.end());

    auto pre = prefill(ckpt, prompt, capacity);
    trace.prefill_seconds = std::chrono::duration<double>(Clock::now() - run_start).count();
    trace.prefill_cache_bytes = pre.cache.bytes();

    KVCache<Real> cache = std::move(pre.cache);
    std::vector<Real> logits = std::move(pre.logits);

    for (std::size_t i = 0; i < n_steps; ++i) {
        const int tok = detail::argmax_token(std::span<const Real>(logits));
        trace.tokens.push_back(tok);
        const auto step_start = Clock::now();
        logits = decode_step(ckpt, cache, tok);
        trace.step_seconds.push_back(
            std::chrono::duration<double>(Clock::now() - step_start).count());
        trace.step_cache_bytes.push_back(cache.bytes());
    }
    trace.total_seconds = std::chrono::duration<double>(Clock::now() - run_start).count();
    return trace;
}

template <typename Real>
DecodeTrace generate(const Checkpoint<Real>& ckpt, const std::vector<int>& prompt,
                     std::size_t n_steps, bool greedy = true,
                     std::size_t capacity = kDefaultCapacity) {
    return generate(ckpt, std::span<const int>(prompt), n_steps, greedy, capacity);
}

} // namespace gqakit
