#pragma once

#include <string>

#include "gqakit/attention.hpp"

namespace gqakit {

/// How the K/V heads of a down-grouped checkpoint are built.
struct ConversionMethod {
    enum class Kind { MeanPool, FirstHead, RandomInit };

    Kind kind = Kind::MeanPool;
    std::uint64_t seed = 0; // RandomInit only

    static ConversionMethod mean_pool() { return {Kind::MeanPool, 0}; }
    static ConversionMethod first_head() { return {Kind::FirstHead, 0}; }
    static ConversionMethod random_init(std::uint64_t seed) { return {Kind::RandomInit, seed}; }

    std::string name() const {
        switch (kind) {
            case Kind::MeanPool: return "mean";
            case Kind::FirstHead: return "first";
            case Kind::RandomInit: return "random";
        }
        return "?";
    }

    static ConversionMethod parse(const std::string& name, std::uint64_t seed) {
        if (name == "mean") return mean_pool();
        if (name == "first") return first_head();
        if (name == "random") return random_init(seed);
        throw ArgumentError("unknown conversion method '" + name +
                            "' (expected mean, first or random)");
    }
};

/// Down-groups a checkpoint from G_src to G_tgt K/V groups. Each target
/// group's K/V block is the mean of its source blocks (MeanPool), the first
/// source block (FirstHead) or fresh normal(0, 1/sqrt(d_model)) values
/// (RandomInit). Wq, Wo and the embeddings are untouched.
template <typename Real>
Checkpoint<Real> convert_checkpoint(const Checkpoint<Real>& src, std::size_t g_tgt,
                                    const ConversionMethod& method) {
    src.validate();
    const AttentionConfig& sc = src.config;
    if (g_tgt == 0) throw ArgumentError("convert: target group count must be positive");
    if (g_tgt > sc.n_kv_groups)
        throw ArgumentError("convert: up-grouping not supported (G_tgt > G_src)");
    if (sc.n_kv_groups % g_tgt != 0)
        throw ArgumentError("convert: G_tgt must divide G_src");

    const std::size_t hd = sc.head_dim;
    const std::size_t pool = sc.n_kv_groups / g_tgt; // source groups per target group

    Checkpoint<Real> out;
    out.config = sc;
    out.config.n_kv_groups = g_tgt;
    out.embedding = src.embedding;
    out.unembedding = src.unembedding;

    Rng root(method.seed);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(sc.d_model));

    for (std::size_t l = 0; l < sc.n_layers; ++l) {
        const LayerWeights<Real>& s = src.layers[l];
        LayerWeights<Real> t;
        t.wq = s.wq;
        t.wo = s.wo;
        if (method.kind == ConversionMethod::Kind::RandomInit) {
            Rng rk = root.child(2 * l);
            Rng rv = root.child(2 * l + 1);
            t.wk = Tensor<Real>::random_normal({sc.d_model, g_tgt * hd}, rk, stddev);
            t.wv = Tensor<Real>::random_normal({sc.d_model, g_tgt * hd}, rv, stddev);
        } else {
            t.wk = Tensor<Real>({sc.d_model, g_tgt * hd});
            t.wv = Tensor<Real>({sc.d_model, g_tgt * hd});
            for (std::size_t g = 0; g < g_tgt; ++g) {
                if (method.kind == ConversionMethod::Kind::FirstHead) {
                    t.wk.set_col_block(g * hd, s.wk.col_block(g * pool * hd, hd));
                    t.wv.set_col_block(g * hd, s.wv.col_block(g * pool * hd, hd));
                } else {
                    std::vector<Tensor<Real>> kblocks, vblocks;
                    for (std::size_t p = 0; p < pool; ++p) {
                        kblocks.push_back(s.wk.col_block((g * pool + p) * hd, hd));
                        vblocks.push_back(s.wv.col_block((g * pool + p) * hd, hd));
                    }
                    t.wk.set_col_block(g * hd, mean_over(kblocks));
                    t.wv.set_col_block(g * hd, mean_over(vblocks));
                }
            }
        }
        out.layers.push_back(std::move(t));
    }
    return out;
}

struct ConversionReport {
    std::size_t source_groups = 0;
    std::size_t target_groups = 0;
    std::string method;
    // Max abs difference between each target K/V block and the source blocks
    // pooled into it; plain elementwise delta when group counts match.
    std::vector<double> per_layer_max_abs_delta;
    double output_drift = 0; // mean abs logit delta on the probe batch
    std::size_t probe_len = 0;
    std::uint64_t probe_seed = 0;
};

template <typename Real>
ConversionReport make_conversion_report(const Checkpoint<Real>& src,
                                        const Checkpoint<Real>& converted,
                                        const ConversionMethod& method,
                                        std::uint64_t probe_seed = 7, std::size_t probe_len = 32) {
    const AttentionConfig& sc = src.config;
    const std::size_t hd = sc.head_dim;
    const std::size_t g_tgt = converted.config.n_kv_groups;
    const std::size_t pool = sc.n_kv_groups / g_tgt;

    ConversionReport rep;
    rep.source_groups = sc.n_kv_groups;
    rep.target_groups = g_tgt;
    rep.method = method.name();
    rep.probe_len = probe_len;
    rep.probe_seed = probe_seed;

    for (std::size_t l = 0; l < sc.n_layers; ++l) {
        double delta = 0;
        for (std::size_t g = 0; g < g_tgt; ++g) {
            for (std::size_t p = 0; p < pool; ++p) {
                delta = std::max(delta,
                                 max_abs_diff(converted.layers[l].wk.col_block(g * hd, hd),
                                              src.layers[l].wk.col_block((g * pool + p) * hd, hd)));
                delta = std::max(delta,
                                 max_abs_diff(converted.layers[l].wv.col_block(g * hd, hd),
                                              src.layers[l].wv.col_block((g * pool + p) * hd, hd)));
            }
        }
        rep.per_layer_max_abs_delta.push_back(delta);
    }

    Rng rng = Rng(probe_seed).child(42);
    std::vector<int> probe(probe_len);
    for (auto& t : probe) t = static_cast<int>(rng.next_below(sc.vocab));
    Tensor<Real> a = model_forward(src, probe);
    Tensor<Real> b = model_forward(converted, probe);
    double sum = 0;
    for (std::size_t i = 0; i < a.numel(); ++i)
        sum += std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]));
    rep.output_drift = sum / static_cast<double>(a.numel());
    return rep;
}

} // namespace gqakit
