#include <algorithm>

#include "doctest.h"
#include "gqakit/costmodel.hpp"
#include "gqakit/train.hpp"
#include "oracles.hpp"

using namespace gqakit;

namespace {

AttentionConfig train_config(std::size_t heads = 4, std::size_t head_dim = 4,
                             std::size_t layers = 1, std::size_t vocab = 16) {
    AttentionConfig cfg;
    cfg.n_heads = heads;
    cfg.n_kv_groups = heads;
    cfg.head_dim = head_dim;
    cfg.d_model = heads * head_dim;
    cfg.n_layers = layers;
    cfg.vocab = vocab;
    cfg.causal = true;
    return cfg;
}

// The learnable regime for this stack: d_model below vocab so the value paths
// carry part of the backbone, one fixed batch big enough to generalize from.
AttentionConfig learnable_config() { return train_config(8, 1, 1, 16); }

TrainConfig quick_train(std::uint64_t seed, std::size_t steps) {
    TrainConfig tc;
    tc.steps = steps;
    tc.learning_rate = 0.3;
    tc.batch_size = 64;
    tc.seed = seed;
    tc.eval_sequences = 64;
    return tc;
}

} // namespace

TEST_CASE("task: streams are reproducible and in range") {
    SyntheticTask task = SyntheticTask::markov(3, 16, 32);
    Rng a(9), b(9);
    CHECK(task.sample_batch(4, a) == task.sample_batch(4, b));
    Rng c(10);
    for (const auto& seq : task.sample_batch(8, c))
        for (int t : seq) {
            CHECK(t >= 0);
            CHECK(t < 16);
        }
}

TEST_CASE("task: markov rows are skewed enough to be learnable") {
    SyntheticTask task = SyntheticTask::markov(3, 16, 32);
    Rng r(1);
    auto batch = task.sample_batch(64, r);
    const double floor = task.ideal_loss(batch);
    CHECK(floor < std::log(16.0) - 0.5);
    CHECK(floor > 0.0);
}

TEST_CASE("task: copy sequences repeat with the fixed offset") {
    SyntheticTask task = SyntheticTask::copy(5, 16, 24, 4);
    Rng r(2);
    auto seq = task.sample_sequence(r);
    for (std::size_t t = 4; t < seq.size(); ++t) CHECK(seq[t] == seq[t - 4]);
    Rng r2(3);
    CHECK(task.ideal_loss(task.sample_batch(4, r2)) < std::log(16.0) * 0.25);
}

TEST_CASE("loss: uniform logits give ln(vocab)") {
    AttentionConfig cfg = train_config();
    Checkpoint<float> ckpt = random_checkpoint<float>(cfg, 1);
    ckpt.unembedding = Tensor<float>(ckpt.unembedding.shape()); // zero: logits all 0
    SyntheticTask task = SyntheticTask::markov(3, 16, 16);
    Rng r(4);
    auto batch = task.sample_batch(4, r);
    CHECK(batch_loss(ckpt, batch) == doctest::Approx(std::log(16.0)).epsilon(1e-6));
    auto lg = loss_and_grads(ckpt, batch);
    CHECK(lg.loss == doctest::Approx(std::log(16.0)).epsilon(1e-6));
}

TEST_CASE("loss: duplicating the batch leaves the mean unchanged") {
    AttentionConfig cfg = train_config();
    Checkpoint<float> ckpt = random_checkpoint<float>(cfg, 2);
    SyntheticTask task = SyntheticTask::markov(7, 16, 12);
    Rng r(5);
    auto one = task.sample_batch(1, r);
    auto two = one;
    two.push_back(one[0]);
    CHECK(loss_and_grads(ckpt, one).loss ==
          doctest::Approx(loss_and_grads(ckpt, two).loss).epsilon(1e-12));
}

TEST_CASE("gradients: match central finite differences at 64-bit") {
    AttentionConfig cfg;
    cfg.n_heads = 4;
    cfg.n_kv_groups = 2;
    cfg.head_dim = 3;
    cfg.d_model = 12;
    cfg.n_layers = 2;
    cfg.vocab = 10;
    cfg.causal = true;
    Checkpoint<double> ckpt = random_checkpoint<double>(cfg, 0);

    SyntheticTask task = SyntheticTask::markov(1, 10, 6);
    Rng r(6);
    auto batch = task.sample_batch(2, r);
    auto lg = loss_and_grads(ckpt, batch);

    const double eps = 1e-5;
    std::uint64_t which = 0;
    auto check_matrix = [&](Tensor<double>& w, const Tensor<double>& g, const char* name) {
        (void)name;
        Rng pick(1000 + which++);
        for (int i = 0; i < 40; ++i) {
            const std::size_t idx = pick.next_below(w.numel());
            const double fd = oracle::fd_grad(ckpt, w.data()[idx], batch, eps);
            const double an = g.data()[idx];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            CHECK(std::abs(fd - an) / denom < 1e-4);
        }
    };
    check_matrix(ckpt.embedding, lg.grads.embedding, "emb");
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        check_matrix(ckpt.layers[l].wq, lg.grads.layers[l].wq, "wq");
        check_matrix(ckpt.layers[l].wk, lg.grads.layers[l].wk, "wk");
        check_matrix(ckpt.layers[l].wv, lg.grads.layers[l].wv, "wv");
        check_matrix(ckpt.layers[l].wo, lg.grads.layers[l].wo, "wo");
    }
    check_matrix(ckpt.unembedding, lg.grads.unembedding, "unemb");
}

TEST_CASE("sgd_step: definitional cases") {
    AttentionConfig cfg = train_config(2, 2, 1, 8);
    Checkpoint<double> ckpt = random_checkpoint<double>(cfg, 3);
    Checkpoint<double> orig = ckpt;
    Checkpoint<double> grads = random_checkpoint<double>(cfg, 4);

    sgd_step(ckpt, grads, 0.0);
    CHECK(bit_equal(ckpt.embedding, orig.embedding));
    CHECK(bit_equal(ckpt.layers[0].wq, orig.layers[0].wq));

    Checkpoint<double> zeros = detail::zero_like(ckpt);
    sgd_step(ckpt, zeros, 0.7);
    CHECK(bit_equal(ckpt.unembedding, orig.unembedding));

    const double before = ckpt.embedding(1, 1);
    Checkpoint<double> one = detail::zero_like(ckpt);
    one.embedding(1, 1) = 2.0;
    sgd_step(ckpt, one, 0.25);
    CHECK(ckpt.embedding(1, 1) - before == -0.25 * 2.0);
}

TEST_CASE("pretrain: same seed gives identical trajectories") {
    AttentionConfig cfg = train_config();
    SyntheticTask task = SyntheticTask::markov(11, 16, 16);
    auto a = pretrain_base<float>(cfg, task, quick_train(21, 12));
    auto b = pretrain_base<float>(cfg, task, quick_train(21, 12));
    CHECK(a.run.loss_trajectory == b.run.loss_trajectory);
    CHECK(a.run.final_eval_loss == b.run.final_eval_loss);
    CHECK(bit_equal(a.ckpt.embedding, b.ckpt.embedding));
}

TEST_CASE("pretrain: zero learning rate freezes the trajectory") {
    AttentionConfig cfg = train_config();
    SyntheticTask task = SyntheticTask::markov(12, 16, 16);
    TrainConfig tc = quick_train(22, 10);
    tc.learning_rate = 0.0;
    auto res = pretrain_base<float>(cfg, task, tc);
    for (double v : res.run.loss_trajectory)
        CHECK(std::abs(v - res.run.loss_trajectory.front()) < 1e-7);
    CHECK(res.run.max_loss_spike == 0.0);
}

TEST_CASE("pretrain: beats the uniform predictor on the markov task") {
    SyntheticTask task = SyntheticTask::markov(13, 16, 32);
    auto res = pretrain_base<float>(learnable_config(), task, quick_train(23, 300));
    CHECK(res.run.final_eval_loss < std::log(16.0) - 0.05);
    CHECK(res.run.loss_trajectory.size() == 300);
}

TEST_CASE("pretrain: exploding runs abort with the trajectory attached") {
    AttentionConfig cfg = train_config();
    SyntheticTask task = SyntheticTask::markov(14, 16, 16);
    TrainConfig tc = quick_train(24, 400);
    tc.learning_rate = 1e14;
    CHECK_THROWS_AS(pretrain_base<float>(cfg, task, tc), TrainingError);
    try {
        pretrain_base<float>(cfg, task, tc);
    } catch (const TrainingError& e) {
        CHECK(e.step() == e.trajectory().size()); // failure step carries context
        CHECK(e.step() < 400);
    }
}

TEST_CASE("pretrain: rejects non-MHA configs and zero steps") {
    AttentionConfig cfg = train_config();
    cfg.n_kv_groups = 2;
    SyntheticTask task = SyntheticTask::markov(15, 16, 16);
    CHECK_THROWS_AS(pretrain_base<float>(cfg, task, quick_train(1, 10)), ArgumentError);
    CHECK_THROWS_AS(pretrain_base<float>(train_config(), task, quick_train(1, 0)),
                    ArgumentError);
}

TEST_CASE("uptrain: alpha 0 with identity conversion reproduces the base eval") {
    AttentionConfig cfg = train_config();
    SyntheticTask task = SyntheticTask::markov(16, 16, 16);
    auto base = pretrain_base<float>(cfg, task, quick_train(25, 40));
    auto up = uptrain(base.ckpt, base.run, cfg.n_heads, ConversionMethod::mean_pool(), 0.0, 99);
    CHECK(up.run.steps == 0);
    CHECK(up.run.loss_trajectory.empty());
    REQUIRE(up.run.eval_points.size() == 1);
    CHECK(up.run.eval_points[0].alpha == 0.0);
    CHECK(std::abs(up.run.final_eval_loss - base.run.final_eval_loss) < 1e-6);
}

TEST_CASE("uptrain: records the alpha grid and does not worsen eval loss") {
    SyntheticTask task = SyntheticTask::markov(17, 16, 32);
    auto base = pretrain_base<float>(learnable_config(), task, quick_train(26, 200));
    for (std::uint64_t seed : {1ull, 2ull}) {
        auto up = uptrain(base.ckpt, base.run, 1, ConversionMethod::mean_pool(), 0.10, seed);
        REQUIRE(up.run.eval_points.size() == 3); // alpha 0, 0.05, 0.10
        CHECK(up.run.eval_points[0].alpha == 0.0);
        CHECK(up.run.eval_points[1].alpha == 0.05);
        CHECK(up.run.eval_points[2].alpha == 0.10);
        CHECK(up.run.eval_points[1].step == 10);
        CHECK(up.run.eval_points[2].step == 20);
        CHECK(up.run.loss_trajectory.size() == 20);
        // training on the same task does not worsen eval at toy scale
        CHECK(up.run.eval_points[1].eval_loss <= up.run.eval_points[0].eval_loss + 1e-3);
        CHECK(up.run.max_loss_spike >= 0.0);
    }
}

TEST_CASE("uptrain: retries on divergence before giving up") {
    AttentionConfig cfg = train_config();
    SyntheticTask task = SyntheticTask::markov(19, 16, 16);
    auto base = pretrain_base<float>(cfg, task, quick_train(28, 5));
    TrainRun hot = base.run;
    hot.learning_rate = 1e14; // every attempt diverges
    CHECK_THROWS_AS(uptrain(base.ckpt, hot, 1, ConversionMethod::mean_pool(), 0.4, 3),
                    TrainingError);
}

TEST_CASE("uptrain: argument validation") {
    AttentionConfig cfg = train_config();
    SyntheticTask task = SyntheticTask::markov(18, 16, 16);
    auto base = pretrain_base<float>(cfg, task, quick_train(27, 10));
    CHECK_THROWS_AS(
        uptrain(base.ckpt, base.run, 1, ConversionMethod::mean_pool(), -0.1, 1),
        ArgumentError);
    CHECK_THROWS_AS(uptrain(base.ckpt, base.run, 1, ConversionMethod::mean_pool(), 1.5, 1),
                    ArgumentError);
    Checkpoint<float> gqa_base = convert_checkpoint(base.ckpt, 2, ConversionMethod::mean_pool());
    CHECK_THROWS_AS(uptrain(gqa_base, base.run, 1, ConversionMethod::mean_pool(), 0.1, 1),
                    ArgumentError);
}

TEST_CASE("convert: mean-pool preserves more than random init (median over seeds)") {
    // Immediate post-conversion eval loss on lightly pretrained toy bases.
    std::vector<double> mean_losses, random_losses;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SyntheticTask task = SyntheticTask::copy(100 + seed, 16, 24, 4);
        TrainConfig tc = quick_train(seed, 300);
        tc.batch_size = 32;
        auto base = pretrain_base<float>(learnable_config(), task, tc);
        auto mean = uptrain(base.ckpt, base.run, 1, ConversionMethod::mean_pool(), 0.0, seed);
        auto rnd = uptrain(base.ckpt, base.run, 1,
                           ConversionMethod::random_init(900 + seed), 0.0, seed);
        mean_losses.push_back(mean.run.final_eval_loss);
        random_losses.push_back(rnd.run.final_eval_loss);
    }
    CHECK(median(mean_losses) <= median(random_losses));
}
