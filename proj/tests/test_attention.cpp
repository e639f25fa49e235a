#include "doctest.h"
#include "gqakit/attention.hpp"
#include "oracles.hpp"

using namespace gqakit;

namespace {

AttentionConfig make_config(std::size_t heads, std::size_t groups, std::size_t head_dim,
                            std::size_t layers = 1, std::size_t vocab = 16,
                            bool causal = true) {
    AttentionConfig cfg;
    cfg.n_heads = heads;
    cfg.n_kv_groups = groups;
    cfg.head_dim = head_dim;
    cfg.d_model = heads * head_dim;
    cfg.n_layers = layers;
    cfg.vocab = vocab;
    cfg.causal = causal;
    return cfg;
}

LayerWeights<float> random_layer(const AttentionConfig& cfg, std::uint64_t seed) {
    Rng root(seed);
    Rng rq = root.child(0), rk = root.child(1), rv = root.child(2), ro = root.child(3);
    const double s = 1.0 / std::sqrt(double(cfg.d_model));
    return {Tensor<float>::random_normal({cfg.d_model, cfg.q_width()}, rq, s),
            Tensor<float>::random_normal({cfg.d_model, cfg.kv_width()}, rk, s),
            Tensor<float>::random_normal({cfg.d_model, cfg.kv_width()}, rv, s),
            Tensor<float>::random_normal({cfg.q_width(), cfg.d_model}, ro, s)};
}

} // namespace

TEST_CASE("config: invariants are enforced") {
    CHECK_THROWS_AS(make_config(8, 16, 4).validate(), ArgumentError); // G > H
    CHECK_THROWS_AS(make_config(8, 3, 4).validate(), ArgumentError);  // H mod G
    AttentionConfig bad = make_config(8, 4, 4);
    bad.d_model = 16; // != H * head_dim
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    CHECK_NOTHROW(make_config(8, 4, 4).validate());
}

TEST_CASE("group_of_head: contiguous block mapping") {
    CHECK(group_of_head(3, make_config(8, 4, 2)) == 1);
    CHECK(group_of_head(5, make_config(8, 1, 2)) == 0);
    CHECK(group_of_head(7, make_config(8, 8, 2)) == 7);
    CHECK_THROWS_AS(group_of_head(8, make_config(8, 4, 2)), ArgumentError);
}

TEST_CASE("attention: G == H equals the independent MHA oracle") {
    AttentionConfig cfg = make_config(2, 2, 4);
    LayerWeights<float> w = random_layer(cfg, 0);
    Rng rx(100);
    Tensor<float> x = Tensor<float>::random_normal({3, cfg.d_model}, rx);
    CHECK(max_abs_diff(attention_forward(cfg, w, x), oracle::mha_forward(cfg, w, x)) < 1e-6);
}

TEST_CASE("attention: T=1 causal reduces to the projection chain") {
    AttentionConfig cfg = make_config(4, 2, 3);
    LayerWeights<float> w = random_layer(cfg, 3);
    Rng rx(4);
    Tensor<float> x = Tensor<float>::random_normal({1, cfg.d_model}, rx);

    // One position: softmax is 1, so each head emits its group's x*Wv block.
    Tensor<float> v = matmul(x, w.wv);
    Tensor<float> heads({1, cfg.q_width()});
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        const std::size_t g = group_of_head(h, cfg);
        for (std::size_t j = 0; j < cfg.head_dim; ++j)
            heads(0, h * cfg.head_dim + j) = v(0, g * cfg.head_dim + j);
    }
    Tensor<float> want = matmul(heads, w.wo);
    CHECK(max_abs_diff(attention_forward(cfg, w, x), want) < 1e-6);
}

TEST_CASE("attention: H=4 G=2 matches the replicated-K/V loop oracle") {
    AttentionConfig cfg = make_config(4, 2, 2);
    LayerWeights<float> w = random_layer(cfg, 0);
    Rng rx(200);
    Tensor<float> x = Tensor<float>::random_normal({5, cfg.d_model}, rx);
    CHECK(max_abs_diff(attention_forward(cfg, w, x),
                       oracle::gqa_replicated_forward(cfg, w, x)) < 1e-6);
}

TEST_CASE("attention: limit identities over seeded cases") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        Rng r(seed);
        const std::size_t heads = std::size_t(1) << r.next_below(4); // 1,2,4,8
        const std::size_t hd = 1 + r.next_below(4);
        const std::size_t T = 1 + r.next_below(6);
        const bool causal = r.next_below(2) == 0;

        AttentionConfig mha_cfg = make_config(heads, heads, hd, 1, 16, causal);
        LayerWeights<float> w = random_layer(mha_cfg, seed * 31 + 1);
        Tensor<float> x = Tensor<float>::random_normal({T, mha_cfg.d_model}, r);
        CHECK(max_abs_diff(attention_forward(mha_cfg, w, x),
                           oracle::mha_forward(mha_cfg, w, x)) < 1e-6);

        AttentionConfig mqa_cfg = make_config(heads, 1, hd, 1, 16, causal);
        LayerWeights<float> w1 = random_layer(mqa_cfg, seed * 31 + 2);
        CHECK(max_abs_diff(attention_forward(mqa_cfg, w1, x),
                           oracle::mqa_forward(mqa_cfg, w1, x)) < 1e-6);
    }
}

TEST_CASE("attention: perturbing one group's Wk only moves that group's heads") {
    AttentionConfig cfg = make_config(8, 4, 3);
    LayerWeights<float> w = random_layer(cfg, 11);
    Rng rx(12);
    Tensor<float> x = Tensor<float>::random_normal({6, cfg.d_model}, rx);

    Tensor<float> before = attention_heads(cfg, w, x);
    const std::size_t g = 2;
    LayerWeights<float> w2 = w;
    for (std::size_t c = 0; c < cfg.d_model; ++c)
        for (std::size_t j = 0; j < cfg.head_dim; ++j)
            w2.wk(c, g * cfg.head_dim + j) += 0.37f;
    Tensor<float> after = attention_heads(cfg, w2, x);

    bool group_changed = false;
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        double delta = max_abs_diff(before.col_block(h * cfg.head_dim, cfg.head_dim),
                                    after.col_block(h * cfg.head_dim, cfg.head_dim));
        if (group_of_head(h, cfg) == g)
            group_changed = group_changed || delta > 0;
        else
            CHECK(delta == 0.0); // exactly untouched
    }
    CHECK(group_changed);
}

TEST_CASE("attention: swapping heads within a group with matching Wq/Wo slices") {
    AttentionConfig cfg = make_config(4, 2, 3);
    LayerWeights<float> w = random_layer(cfg, 21);
    Rng rx(22);
    Tensor<float> x = Tensor<float>::random_normal({5, cfg.d_model}, rx);
    Tensor<float> before = attention_forward(cfg, w, x);

    // Heads 0 and 1 share group 0: swap their Wq column blocks and Wo row blocks.
    LayerWeights<float> w2 = w;
    const std::size_t hd = cfg.head_dim;
    for (std::size_t c = 0; c < cfg.d_model; ++c)
        for (std::size_t j = 0; j < hd; ++j)
            std::swap(w2.wq(c, 0 * hd + j), w2.wq(c, 1 * hd + j));
    for (std::size_t j = 0; j < hd; ++j)
        for (std::size_t c = 0; c < cfg.d_model; ++c)
            std::swap(w2.wo(0 * hd + j, c), w2.wo(1 * hd + j, c));

    CHECK(max_abs_diff(attention_forward(cfg, w2, x), before) < 1e-6);
}

TEST_CASE("model_forward: Wo = 0 leaves only the embedding chain") {
    AttentionConfig cfg = make_config(2, 2, 2, 1, 4);
    Checkpoint<float> ckpt = random_checkpoint<float>(cfg, 5);
    ckpt.embedding = Tensor<float>::identity(4); // vocab == d_model == 4
    for (auto& l : ckpt.layers) l.wo = Tensor<float>(l.wo.shape());

    std::vector<int> tokens = {1, 3, 0, 2};
    Tensor<float> logits = model_forward(ckpt, tokens);
    for (std::size_t t = 0; t < tokens.size(); ++t)
        for (std::size_t j = 0; j < cfg.vocab; ++j)
            CHECK(logits(t, j) ==
                  ckpt.unembedding(static_cast<std::size_t>(tokens[t]), j));
}

TEST_CASE("model_forward: G=H stack equals the oracle stack within 1e-5") {
    AttentionConfig cfg = make_config(4, 4, 4, 2, 12);
    Checkpoint<float> ckpt = random_checkpoint<float>(cfg, 7);
    std::vector<int> tokens = {3, 1, 4, 4, 0, 7};
    CHECK(max_abs_diff(model_forward(ckpt, tokens), oracle::model_forward(ckpt, tokens)) <
          1e-5);
}

TEST_CASE("model_forward: matches the 64-bit recomputation oracle within 1e-4") {
    AttentionConfig cfg = make_config(4, 2, 4, 2, 12);
    Checkpoint<float> ckpt = random_checkpoint<float>(cfg, 0);
    std::vector<int> tokens = {5, 2, 9, 0, 11, 3, 3, 1};
    Tensor<float> got = model_forward(ckpt, tokens);
    Tensor<double> ref = oracle::model_forward(oracle::widen(ckpt), tokens);
    double worst = 0;
    for (std::size_t i = 0; i < got.numel(); ++i)
        worst = std::max(worst, std::abs(double(got.data()[i]) - ref.data()[i]));
    CHECK(worst < 1e-4);
}

TEST_CASE("model_forward: causal logits ignore future tokens exactly") {
    AttentionConfig cfg = make_config(4, 2, 3, 2, 10);
    Checkpoint<float> ckpt = random_checkpoint<float>(cfg, 13);
    std::vector<int> a = {1, 2, 3, 4, 5, 6};
    std::vector<int> b = {1, 2, 3, 9, 8, 7}; // differs from position 3 on
    Tensor<float> la = model_forward(ckpt, a);
    Tensor<float> lb = model_forward(ckpt, b);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t j = 0; j < cfg.vocab; ++j) CHECK(la(t, j) == lb(t, j));
}

TEST_CASE("model_forward: token out of range is rejected") {
    AttentionConfig cfg = make_config(2, 2, 2, 1, 4);
    Checkpoint<float> ckpt = random_checkpoint<float>(cfg, 1);
    CHECK_THROWS_AS(model_forward(ckpt, std::vector<int>{0, 4}), ArgumentError);
    CHECK_THROWS_AS(model_forward(ckpt, std::vector<int>{-1}), ArgumentError);
}
