#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gqakit/tensor.hpp"

namespace gqakit {

/// Model shape. G = n_kv_groups interpolates between multi-query (G = 1) and
/// multi-head (G = n_heads) attention; query heads are assigned to groups in
/// contiguous blocks of n_heads / G.
struct AttentionConfig {
    std::size_t d_model = 0;
    std::size_t n_heads = 0;
    std::size_t n_kv_groups = 0;
    std::size_t head_dim = 0;
    std::size_t n_layers = 0;
    std::size_t vocab = 0;
    bool causal = true;

    std::size_t heads_per_group() const { return n_heads / n_kv_groups; }
    std::size_t kv_width() const { return n_kv_groups * head_dim; }
    std::size_t q_width() const { return n_heads * head_dim; }

    void validate() const {
        if (d_model == 0 || n_heads == 0 || n_kv_groups == 0 || head_dim == 0 || n_layers == 0 ||
            vocab == 0)
            throw ArgumentError("config: all extents must be positive");
        if (n_kv_groups > n_heads) throw ArgumentError("config: G must satisfy 1 <= G <= H");
        if (n_heads % n_kv_groups != 0) throw ArgumentError("config: H mod G != 0");
        if (d_model != n_heads * head_dim)
            throw ArgumentError("config: d_model != n_heads * head_dim");
    }

    bool operator==(const AttentionConfig&) const = default;
};

/// Group owning query head h: contiguous blocks of H/G heads share one K/V head.
inline std::size_t group_of_head(std::size_t h, const AttentionConfig& config) {
    if (h >= config.n_heads) throw ArgumentError("group_of_head: head index out of range");
    return h / config.heads_per_group();
}

/// One layer's projections. Wk/Wv are G*head_dim wide, never H*head_dim for G < H.
template <typename Real>
struct LayerWeights {
    Tensor<Real> wq; // [d_model x H*head_dim]
    Tensor<Real> wk; // [d_model x G*head_dim]
    Tensor<Real> wv; // [d_model x G*head_dim]
    Tensor<Real> wo; // [H*head_dim x d_model]
};

template <typename Real>
struct Checkpoint {
    AttentionConfig config;
    Tensor<Real> embedding;   // [vocab x d_model]
    std::vector<LayerWeights<Real>> layers;
    Tensor<Real> unembedding; // [d_model x vocab]

    void validate() const {
        config.validate();
        if (embedding.shape() != std::vector<std::size_t>{config.vocab, config.d_model})
            throw ArgumentError("checkpoint: embedding shape inconsistent with config");
        if (unembedding.shape() != std::vector<std::size_t>{config.d_model, config.vocab})
            throw ArgumentError("checkpoint: unembedding shape inconsistent with config");
        if (layers.size() != config.n_layers)
            throw ArgumentError("checkpoint: layer count inconsistent with config");
        for (const auto& l : layers) {
            if (l.wq.shape() != std::vector<std::size_t>{config.d_model, config.q_width()} ||
                l.wk.shape() != std::vector<std::size_t>{config.d_model, config.kv_width()} ||
                l.wv.shape() != std::vector<std::size_t>{config.d_model, config.kv_width()} ||
                l.wo.shape() != std::vector<std::size_t>{config.q_width(), config.d_model})
                throw ArgumentError("checkpoint: layer weight shape inconsistent with config");
        }
    }
};

/// Fresh checkpoint with normal(0, 1/sqrt(d_model)) weights, one child RNG
/// stream per matrix so layouts can change without reshuffling other matrices.
template <typename Real>
Checkpoint<Real> random_checkpoint(const AttentionConfig& config, std::uint64_t seed) {
    config.validate();
    const double stddev = 1.0 / std::sqrt(static_cast<double>(config.d_model));
    Rng root(seed);
    Checkpoint<Real> ckpt;
    ckpt.config = config;
    {
        Rng r = root.child(0);
        ckpt.embedding = Tensor<Real>::random_normal({config.vocab, config.d_model}, r, stddev);
    }
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        Rng rq = root.child(10 + 4 * l);
        Rng rk = root.child(11 + 4 * l);
        Rng rv = root.child(12 + 4 * l);
        Rng ro = root.child(13 + 4 * l);
        LayerWeights<Real> w;
        w.wq = Tensor<Real>::random_normal({config.d_model, config.q_width()}, rq, stddev);
        w.wk = Tensor<Real>::random_normal({config.d_model, config.kv_width()}, rk, stddev);
        w.wv = Tensor<Real>::random_normal({config.d_model, config.kv_width()}, rv, stddev);
        w.wo = Tensor<Real>::random_normal({config.q_width(), config.d_model}, ro, stddev);
        ckpt.layers.push_back(std::move(w));
    }
    {
        Rng r = root.child(1);
        ckpt.unembedding =
            Tensor<Real>::random_normal({config.d_model, config.vocab}, r, stddev);
    }
    return ckpt;
}

namespace detail {

/// Softmax of row prefix [0, valid) in place; entries at and past `valid` are
/// zeroed. Keeps masked attention free of infinities.
template <typename Real>
void softmax_prefix(std::span<Real> row, std::size_t valid) {
    Real mx = row[0];
    for (std::size_t j = 1; j < valid; ++j) mx = std::max(mx, row[j]);
    Real sum = 0;
    for (std::size_t j = 0; j < valid; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
    }
    for (std::size_t j = 0; j < valid; ++j) row[j] /= sum;
    for (std::size_t j = valid; j < row.size(); ++j) row[j] = Real(0);
}

/// Attention probabilities for one head: softmax(Q_h K_g^T / sqrt(head_dim)),
/// causally masked when requested. q is [Tq x head_dim], k is [Tk x head_dim];
/// when causal, query row i attends to keys [0, offset + i].
template <typename Real>
Tensor<Real> head_probs(const Tensor<Real>& q, const Tensor<Real>& k, bool causal,
                        std::size_t offset) {
    const Real inv_sqrt_d = Real(1) / static_cast<Real>(std::sqrt(double(q.cols())));
    Tensor<Real> scores = matmul_nt(q, k);
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        auto row = scores.row(i);
        for (auto& v : row) v *= inv_sqrt_d;
        const std::size_t valid = causal ? std::min(offset + i + 1, k.rows()) : k.rows();
        softmax_prefix(row, valid);
    }
    check_finite(scores, "attention probs");
    return scores;
}

} // namespace detail

/// Per-head attention outputs concatenated, [T x H*head_dim]; this is the
/// tensor immediately before the Wo projection.
template <typename Real>
Tensor<Real> attention_heads(const AttentionConfig& config, const LayerWeights<Real>& w,
                             const Tensor<Real>& x) {
    config.validate();
    if (x.rank() != 2 || x.cols() != config.d_model)
        throw DimensionError("attention: input must be [T x d_model]");
    const std::size_t hd = config.head_dim;
    Tensor<Real> q = matmul(x, w.wq);
    Tensor<Real> k = matmul(x, w.wk);
    Tensor<Real> v = matmul(x, w.wv);
    Tensor<Real> heads({x.rows(), config.q_width()});
    for (std::size_t h = 0; h < config.n_heads; ++h) {
        const std::size_t g = group_of_head(h, config);
        Tensor<Real> qh = q.col_block(h * hd, hd);
        Tensor<Real> kg = k.col_block(g * hd, hd);
        Tensor<Real> vg = v.col_block(g * hd, hd);
        Tensor<Real> probs = detail::head_probs(qh, kg, config.causal, 0);
        heads.set_col_block(h * hd, matmul(probs, vg));
    }
    return heads;
}

/// Grouped-query attention forward pass: each query head attends with the
/// K/V of its group; outputs are concatenated and projected by Wo.
template <typename Real>
Tensor<Real> attention_forward(const AttentionConfig& config, const LayerWeights<Real>& w,
                               const Tensor<Real>& x) {
    return matmul(attention_heads(config, w, x), w.wo);
}

/// Minimal decoder stack: embed, n_layers of (attention + residual), unembed.
template <typename Real>
Tensor<Real> model_forward(const Checkpoint<Real>& ckpt, std::span<const int> tokens) {
    const AttentionConfig& cfg = ckpt.config;
    Tensor<Real> h({tokens.size(), cfg.d_model});
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (tokens[t] < 0 || static_cast<std::size_t>(tokens[t]) >= cfg.vocab)
            throw ArgumentError("model_forward: token out of range");
        auto src = ckpt.embedding.row(static_cast<std::size_t>(tokens[t]));
        std::copy(src.begin(), src.end(), h.row(t).begin());
    }
    for (const auto& layer : ckpt.layers) add_inplace(h, attention_forward(cfg, layer, h));
    return matmul(h, ckpt.unembedding);
}

template <typename Real>
Tensor<Real> model_forward(const Checkpoint<Real>& ckpt, const std::vector<int>& tokens) {
    return model_forward(ckpt, std::span<const int>(tokens));
}

} // namespace gqakit
