#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "spandet/gradcheck.hpp"
#include "spandet/loss.hpp"
#include "spandet/ops.hpp"
#include "spandet/optim.hpp"
#include "spandet/synth.hpp"
#include "spandet/trainer.hpp"
#include "support/grad_cases.hpp"
#include "support/oracles.hpp"

using namespace spandet;

namespace {

DecoderOutput hand_output(const std::vector<std::vector<double>>& cw_per_layer, const std::vector<std::vector<double>>& logits_per_layer,
                          std::size_t learnable, std::size_t denoising = 0) {
    DecoderOutput out;
    out.num_learnable = learnable;
    out.num_denoising = denoising;
    const std::size_t q = learnable + denoising;
    for (std::size_t l = 0; l < cw_per_layer.size(); ++l)
        out.layers.push_back({Tensor::from({q, 2}, cw_per_layer[l]), Tensor::from({q, 1}, logits_per_layer[l])});
    return out;
}

ModelConfig tiny_cfg() {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.num_queries = 1;
    cfg.max_tokens = 128;
    return cfg;
}

struct Corpus {
    std::vector<Sample> train, val;
};

Corpus small_corpus(std::size_t n) {
    SynthSpec spec;
    spec.n_texts = n;
    spec.sentences = 4;
    spec.vocabulary = 80;
    const auto split = synth_generate(spec, 3);
    const SignalProvider provider(16, 3, 5.0);
    return {prepare_samples(split.train, provider, tiny_cfg()), prepare_samples(split.val, provider, tiny_cfg())};
}

}  // namespace

TEST(Focal, Examples) {
    EXPECT_NEAR(focal_loss(0.0, 1, 0.5, 0.0), 0.5 * std::log(2.0), 1e-15);
    EXPECT_NEAR(focal_loss(0.0, 0, 0.5, 0.0), 0.5 * std::log(2.0), 1e-15);
    EXPECT_LT(focal_loss(60.0, 1, 0.25, 2.0), 1e-20);
    const double z = std::log(0.9 / 0.1);  // p = 0.9
    EXPECT_NEAR(focal_loss(z, 1, 0.25, 2.0), 0.25 * 0.01 * -std::log(0.9), 1e-15);
    EXPECT_NEAR(focal_loss(z, 1, 0.25, 2.0), 2.634e-4, 1e-7);
}

TEST(Focal, TensorMatchesScalar) {
    std::mt19937_64 rng(1);
    const auto z = support::randn(rng, {6, 1});
    const std::vector<double> t{1, 0, 0, 1, 1, 0};
    const auto f = focal_loss(z, t, FocalParams{});
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(f.at(i, 0), focal_loss(z.at(i, 0), static_cast<int>(t[i]), 0.25, 2.0), 1e-14);
    EXPECT_LT(grad_check([&](const Tensor& x) { return sum(focal_loss(x, t, FocalParams{})); }, z), 1e-4);
}

TEST(Denoising, ZeroNoiseReproducesGroundTruth) {
    std::mt19937_64 rng(1);
    const std::vector<Interval> gts{{0.3, 0.2}, {0.8, 0.1}};
    const auto dn = make_denoising(gts, {3, 0.0, 0.0}, rng);
    ASSERT_EQ(dn.size(), 6u);
    for (std::size_t k = 0; k < dn.size(); ++k) EXPECT_EQ(dn.anchors[k], gts[k % 2]);
}

TEST(Denoising, CountsAndTargetMap) {
    std::mt19937_64 rng(2);
    const std::vector<Interval> gts{{0.2, 0.1}, {0.5, 0.2}, {0.8, 0.3}};
    const auto dn = make_denoising(gts, {2, 0.4, 0.4}, rng);
    EXPECT_EQ(dn.size(), 6u);
    EXPECT_EQ(dn.target, (std::vector<std::size_t>{0, 1, 2, 0, 1, 2}));
    EXPECT_EQ(dn.group, (std::vector<std::size_t>{0, 0, 0, 1, 1, 1}));
    EXPECT_TRUE(make_denoising({}, {5, 0.4, 0.4}, rng).empty());
}

TEST(Denoising, AnchorsAlwaysValid) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> lo(0.0, 0.9);
        std::vector<Interval> gts;
        for (int i = 0; i < 4; ++i) {
            const double a = lo(rng), b = a + std::uniform_real_distribution<double>(0.01, 1.0 - a)(rng);
            gts.push_back(Interval::from_bounds(a, b));
        }
        const auto dn = make_denoising(gts, {5, 1.0, 0.99}, rng);
        for (const auto& a : dn.anchors) {
            EXPECT_TRUE(is_valid(a));
            EXPECT_GE(a.lo(), -1e-9);
            EXPECT_LE(a.hi(), 1.0 + 1e-9);
        }
    }
}

TEST(Denoising, NoiseStaysInsideConfiguredRange) {
    std::mt19937_64 rng(4);
    const std::vector<Interval> gts{{0.5, 0.2}};
    const auto dn = make_denoising(gts, {500, 0.4, 0.3}, rng);
    for (const auto& a : dn.anchors) {
        EXPECT_LE(std::abs(a.c - 0.5), 0.4 * 0.2 + 1e-12);
        EXPECT_LE(std::abs(a.w / 0.2 - 1.0), 0.3 + 1e-12);
    }
}

TEST(Denoising, AttentionMaskBlocksLeakage) {
    std::mt19937_64 rng(5);
    const std::vector<Interval> gts{{0.3, 0.2}, {0.7, 0.2}};
    const auto dn = make_denoising(gts, {2, 0.4, 0.4}, rng);
    const std::size_t n = 3, q = n + dn.size();
    const auto mask = dn.attention_mask(n);
    ASSERT_EQ(mask.size(), q * q);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < q; ++j) {
            bool blocked;
            if (j < n) blocked = false;  // everyone sees learnable queries
            else if (i < n) blocked = true;
            else blocked = dn.group[i - n] != dn.group[j - n];
            EXPECT_EQ(mask[i * q + j] != 0, blocked) << i << "," << j;
        }
}

TEST(CompositeLoss, PerfectPredictionLeavesOnlyFocalFloor) {
    // query 0 matches the gt exactly with a confident logit, query 1 is confident background
    const auto out = hand_output({{0.4, 0.2, 0.8, 0.1}}, {{30.0, -30.0}}, 2);
    const std::vector<Interval> gts{{0.4, 0.2}};
    const auto lb = composite_loss(out, nullptr, gts);
    EXPECT_NEAR(lb.final_terms().span, 0.0, 1e-15);
    EXPECT_NEAR(lb.final_terms().giou, 0.0, 1e-15);
    EXPECT_LT(lb.total.item(), 1e-14);  // rounding in 1 - gIoU
    EXPECT_EQ(lb.assignments[0].pairs, (support::Pairs{{0, 0}}));
}

TEST(CompositeLoss, NoGroundTruthOnlyFocal) {
    const auto out = hand_output({{0.4, 0.2, 0.8, 0.1}}, {{0.3, -1.0}}, 2);
    const auto lb = composite_loss(out, nullptr, {});
    EXPECT_EQ(lb.final_terms().span, 0.0);
    EXPECT_EQ(lb.final_terms().giou, 0.0);
    const double expect = 4.0 * (focal_loss(0.3, 0, 0.25, 2) + focal_loss(-1.0, 0, 0.25, 2));
    EXPECT_NEAR(lb.total.item(), expect, 1e-14);
}

TEST(CompositeLoss, SingleQueryHandEvaluation) {
    // pred (0.5, 0.4) logit 0.2, gt (0.6, 0.2): L1 = 0.1 + 0.2 = 0.3,
    // pred spans [0.3, 0.7], gt [0.5, 0.7] -> IoU = gIoU = 0.2 / 0.4 = 0.5
    const auto out = hand_output({{0.5, 0.4}}, {{0.2}}, 1);
    const std::vector<Interval> gts{{0.6, 0.2}};
    const double p = 1.0 / (1.0 + std::exp(-0.2));
    const double focal = -0.25 * (1 - p) * (1 - p) * std::log(p);
    const double expect = 10.0 * 0.3 + 1.0 * 0.5 + 4.0 * focal;
    EXPECT_NEAR(composite_loss(out, nullptr, gts).total.item(), expect, 1e-9);
}

TEST(CompositeLoss, MatchesScalarObjectiveWithDenoisingAndAuxLayers) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> c(0.15, 0.85), w(0.05, 0.3), z(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::vector<Interval> gts{{c(rng), w(rng)}, {c(rng), w(rng)}};
        const auto dn = make_denoising(gts, {2, 0.4, 0.4}, rng);
        const std::size_t n = 3, nd = dn.size(), layers = 3;
        std::vector<std::vector<double>> cw(layers), lg(layers);
        std::vector<support::ScalarLayer> scalar(layers);
        for (std::size_t l = 0; l < layers; ++l)
            for (std::size_t k = 0; k < n + nd; ++k) {
                const double cc = c(rng), ww = w(rng), zz = z(rng);
                cw[l].insert(cw[l].end(), {cc, ww});
                lg[l].push_back(zz);
                if (k < n) {
                    scalar[l].c.push_back(cc);
                    scalar[l].w.push_back(ww);
                    scalar[l].logit.push_back(zz);
                } else {
                    scalar[l].dn_c.push_back(cc);
                    scalar[l].dn_w.push_back(ww);
                }
            }
        const auto out = hand_output(cw, lg, n, nd);
        double expect = 0;
        for (const auto& s : scalar) expect += support::scalar_layer_objective(s, gts, dn.target, {10, 1, 4, 9, 3});
        EXPECT_NEAR(composite_loss(out, &dn, gts).total.item(), expect, 1e-9);
    }
}

TEST(CompositeLoss, DoublingWeightsDoublesTotal) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> c(0.2, 0.8), w(0.05, 0.3), z(-2.0, 2.0);
    const std::vector<Interval> gts{{c(rng), w(rng)}};
    const auto dn = make_denoising(gts, {2, 0.4, 0.4}, rng);
    std::vector<double> cw, lg;
    for (int k = 0; k < 4; ++k) {
        cw.insert(cw.end(), {c(rng), w(rng)});
        lg.push_back(z(rng));
    }
    const auto out = hand_output({cw, cw}, {lg, lg}, 2, 2);
    LossOptions a, b;
    b.weights = {20.0, 2.0, 8.0, 18.0, 6.0};
    EXPECT_EQ(composite_loss(out, &dn, gts, b).total.item(), 2.0 * composite_loss(out, &dn, gts, a).total.item());
}

TEST(CompositeLoss, GradientAtNonTiePoints) {
    const std::vector<Interval> gts{{0.45, 0.2}};
    auto f = [&](const std::vector<Tensor>& x) {
        DecoderOutput out;
        out.num_learnable = 2;
        out.layers.push_back({x[0], x[1]});
        return composite_loss(out, nullptr, gts).total;
    };
    const auto ivs = Tensor::from({2, 2}, {0.42, 0.27, 0.7, 0.15});
    const auto logits = Tensor::from({2, 1}, {0.3, -0.5});
    EXPECT_LT(grad_check(f, {ivs, logits}), 1e-4);
}

TEST(CompositeLoss, LearnableTermsIgnoreDenoising) {
    auto cfg = tiny_cfg();
    cfg.num_queries = 3;
    DetectionTransformer m(cfg, 2);
    std::mt19937_64 rng(2);
    ModelInput in{support::randn(rng, {6, 16}), {0.05, 0.2, 0.35, 0.5, 0.7, 0.9}};
    const std::vector<Interval> gts{{0.3, 0.2}, {0.7, 0.2}};

    auto run = [&](std::size_t groups) {
        const auto dn = make_denoising(gts, {groups, 0.4, 0.4}, rng);
        const Binding b(m.params(), true);
        const auto out = m.forward(b, in, dn.empty() ? nullptr : &dn);
        const auto lb = composite_loss(out, dn.empty() ? nullptr : &dn, gts);
        const double value = lb.learnable_total.item();
        backward(lb.learnable_total);
        return std::make_pair(value, b.gradients());
    };
    const auto base = run(0);
    for (std::size_t g : {1u, 5u}) {
        const auto other = run(g);
        EXPECT_EQ(other.first, base.first);
        // denoising.content receives no learnable-loss gradient either way
        EXPECT_EQ(other.second, base.second);
    }
}

TEST(AdamW, ZeroGradientZeroDecayIsIdentity) {
    ParameterStore ps;
    ps.add("w", {3}, {1.0, -2.0, 0.5});
    AdamW opt(ps, {0.9, 0.999, 1e-8, 0.0});
    opt.step(ps, {{0, 0, 0}}, 0.1);
    EXPECT_EQ(*ps[0].value, (std::vector<double>{1.0, -2.0, 0.5}));
}

TEST(AdamW, FirstStepMovesByLearningRate) {
    ParameterStore ps;
    ps.add("w", {3}, {1.0, 1.0, 1.0});
    AdamW opt(ps, {0.9, 0.999, 1e-8, 0.0});
    const double lr = 0.01;
    opt.step(ps, {{0.5, -3.0, 1e-3}}, lr);
    // bias-corrected moments give m/sqrt(v) = sign(g) exactly; only eps remains
    const std::vector<double> g{0.5, -3.0, 1e-3};
    for (std::size_t i = 0; i < 3; ++i) {
        const double expect = 1.0 - lr * g[i] / (std::abs(g[i]) + 1e-8);
        EXPECT_NEAR((*ps[0].value)[i], expect, 1e-15);
        EXPECT_NEAR(std::abs((*ps[0].value)[i] - 1.0), lr, 1e-7);
    }
}

TEST(AdamW, DecayOnlyShrinks) {
    ParameterStore ps;
    ps.add("w", {2}, {2.0, -4.0});
    AdamW opt(ps, {0.9, 0.999, 1e-8, 0.1});
    opt.step(ps, {{0, 0}}, 0.5);
    EXPECT_DOUBLE_EQ((*ps[0].value)[0], 2.0 * (1 - 0.05));
    EXPECT_DOUBLE_EQ((*ps[0].value)[1], -4.0 * (1 - 0.05));
}

TEST(CosineLr, Examples) {
    EXPECT_DOUBLE_EQ(cosine_lr(10, 110, 1e-3, 10), 1e-3);
    EXPECT_DOUBLE_EQ(cosine_lr(110, 110, 1e-3, 10), 0.0);
    EXPECT_NEAR(cosine_lr(60, 110, 1e-3, 10), 5e-4, 1e-18);
    EXPECT_DOUBLE_EQ(cosine_lr(5, 110, 1e-3, 10), 5e-4);
    EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 2e-4, 0), 2e-4);
    double prev = 1.0;
    for (std::size_t s = 10; s <= 110; ++s) {
        const double v = cosine_lr(s, 110, 1e-3, 10);
        EXPECT_LE(v, prev);
        prev = v;
    }
}

TEST(ClipGradNorm, RescalesAboveThreshold) {
    Gradients g{{3.0}, {4.0}};
    EXPECT_DOUBLE_EQ(clip_grad_norm(g, 1.0), 5.0);
    EXPECT_NEAR(g[0][0], 0.6, 1e-12);
    EXPECT_NEAR(g[1][0], 0.8, 1e-12);
    Gradients small{{0.01}};
    clip_grad_norm(small, 1.0);
    EXPECT_EQ(small[0][0], 0.01);
}

TEST(TrainConfig, PresetsAndValidation) {
    const auto roft = TrainConfig::preset("roft");
    EXPECT_EQ(roft.batch_size, 32u);
    EXPECT_EQ(roft.lr, 1e-4);
    EXPECT_EQ(roft.epochs, 75u);
    EXPECT_EQ(roft.loss.weights.span, 10.0);
    EXPECT_EQ(roft.loss.weights.giou, 1.0);
    EXPECT_EQ(roft.loss.weights.focal, 4.0);
    EXPECT_EQ(roft.loss.weights.dn_span, 9.0);
    EXPECT_EQ(roft.loss.weights.dn_giou, 3.0);
    EXPECT_THROW(TrainConfig::preset("nope"), std::invalid_argument);
    TrainConfig bad;
    bad.lr = 0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    const auto rt = train_config_from_json(nlohmann::json::parse(to_json(roft).dump()));
    EXPECT_EQ(to_json(rt), to_json(roft));
    EXPECT_THROW(train_config_from_json({{"epochz", 3}}), std::invalid_argument);
}

TEST(Train, EmptyDatasetThrows) {
    DetectionTransformer m(tiny_cfg(), 0);
    EXPECT_THROW(train(m, {}, {}, TrainConfig{}), std::invalid_argument);
}

TEST(Train, NonFiniteInputRaisesNumericalError) {
    auto corpus = small_corpus(10);
    auto& emb = corpus.train[0].input.embeddings;
    emb = Tensor::full(emb.shape(), std::numeric_limits<double>::quiet_NaN());
    DetectionTransformer m(tiny_cfg(), 0);
    TrainConfig tc;
    tc.epochs = 1;
    EXPECT_THROW(train(m, corpus.train, {}, tc), NumericalError);
}

TEST(Train, LossDecreasesAndRunsAreReproducible) {
    const auto corpus = small_corpus(80);
    TrainConfig tc;
    tc.epochs = 5;
    tc.batch_size = 8;
    tc.lr = 1e-3;
    DetectionTransformer a(tiny_cfg(), 5), b(tiny_cfg(), 5);
    const auto ra = train(a, corpus.train, corpus.val, tc);
    const auto rb = train(b, corpus.train, corpus.val, tc);
    ASSERT_EQ(ra.logs.size(), 5u);
    EXPECT_LT(ra.logs[4].train_loss, ra.logs[0].train_loss);
    for (std::size_t e = 0; e < 5; ++e) {
        EXPECT_EQ(ra.logs[e].train_loss, rb.logs[e].train_loss);
        EXPECT_EQ(ra.logs[e].val_loss, rb.logs[e].val_loss);
    }
    for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(*a.params()[i].value, *b.params()[i].value);
    EXPECT_GE(ra.best_epoch, 1u);  // epochs count from 1
    EXPECT_LE(ra.best_epoch, 5u);
}

TEST(Train, ParallelBatchMatchesSerial) {
    const auto corpus = small_corpus(40);
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 8;
    tc.lr = 1e-3;
    DetectionTransformer a(tiny_cfg(), 6), b(tiny_cfg(), 6);
    const auto ra = train(a, corpus.train, corpus.val, tc);
    tc.parallel_batch = true;
    const auto rb = train(b, corpus.train, corpus.val, tc);
    for (std::size_t e = 0; e < 2; ++e) EXPECT_EQ(ra.logs[e].train_loss, rb.logs[e].train_loss);
    for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(*a.params()[i].value, *b.params()[i].value);
}

TEST(Train, CallbackSeesEveryEpochAndBestCopy) {
    const auto corpus = small_corpus(30);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 8;
    DetectionTransformer m(tiny_cfg(), 7);
    std::size_t calls = 0, bests = 0;
    const auto r = train(m, corpus.train, corpus.val, tc, [&](const EpochLog& log, const DetectionTransformer&, bool best) {
        ++calls;
        EXPECT_EQ(log.epoch, calls);
        bests += best;
    });
    EXPECT_EQ(calls, 3u);
    EXPECT_GE(bests, 1u);
    EXPECT_EQ(r.best_val_loss, r.logs[r.best_epoch - 1].val_loss);
    for (const auto& log : r.logs) EXPECT_GE(log.val_loss, 0.0);
    EXPECT_EQ(r.best_params.size(), m.params().size());
}

TEST(Predict, SampleIntervalsAreValidSpans) {
    const auto corpus = small_corpus(10);
    DetectionTransformer m(tiny_cfg(), 8);
    for (const auto& s : corpus.train) {
        const auto p = predict_sample(m, s);
        ASSERT_EQ(p.intervals.size(), 1u);
        EXPECT_TRUE(is_valid(p.intervals[0], s.text_length));
        EXPECT_EQ(p.id, s.id);
    }
}
