// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "spandet/checkpoint.hpp"
#include "spandet/classifier.hpp"
#include "spandet/converters.hpp"
#include "spandet/gradcheck.hpp"
#include "spandet/loss.hpp"
#include "spandet/matching.hpp"
#include "spandet/metrics.hpp"
#include "spandet/synth.hpp"
#include "spandet/trainer.hpp"
#include "support/grad_cases.hpp"
#include "support/oracles.hpp"
#include "support/postproc.hpp"

using namespace spandet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Records the first failing check and keeps going.
struct Check {
    Outcome out;
    void expect(bool ok, const std::string& what) {
        if (!ok && out.pass) {
            out.pass = false;
            out.detail = what;
        }
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto d = fs::temp_directory_path() / "spandet_acceptance" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

// ------------------------------------------------------------------ 1

Outcome gradient_fidelity() {
    double worst = 0.0;
    std::string where;
    for (const auto& gc : support::op_grad_cases())
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            std::mt19937_64 rng(seed);
            const double e = grad_check(gc.f, gc.inputs(rng));
            if (e > worst) worst = e, where = gc.name;
        }
    double model_worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) model_worst = std::max(model_worst, support::model_grad_error(seed));
    Check c;
    c.expect(worst < 1e-4, "op " + where + " rel err " + fmt("%.3g", worst));
    c.expect(model_worst < 1e-4, "model rel err " + fmt("%.3g", model_worst));
    if (c.out.pass) c.out.detail = fmt("%.0f op cases x 100 seeds max %.2e, model x 100 seeds max %.2e", double(support::op_grad_cases().size()), worst, model_worst);
    return c.out;
}

// ------------------------------------------------------------------ 2

Outcome matching_oracle() {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> d;
    std::uniform_int_distribution<int> small(0, 3);
    Check c;
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + rng() % 7, m = rng() % (n + 1);
        CostMatrix cost(n, m);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) cost.at(i, j) = t % 3 == 0 ? small(rng) : d(rng);
        const auto got = hungarian(cost);
        const auto want = support::brute_force_assignment(cost);
        c.expect(got.pairs == want.pairs && got.cost == want.cost, "matrix " + std::to_string(t) + " differs from exhaustive search");
    }
    if (c.out.pass) c.out.detail = "200 matrices up to 7x7 identical to exhaustive search";
    return c.out;
}

// ------------------------------------------------------------------ 3

Outcome geometry_algebra() {
    Check c;
    std::size_t spans = 0;
    for (std::size_t len = 1; len <= 160; ++len)
        for (std::size_t x1 = 0; x1 < len; ++x1)
            for (std::size_t x2 = x1 + 1; x2 <= len; ++x2, ++spans) {
                const auto iv = span_to_cw({x1, x2}, len);
                c.expect(is_valid(iv) && cw_to_span(iv, len) == CharSpan{x1, x2}, "round trip fails at len " + std::to_string(len));
            }
    // interval pairs on a lattice, then random pairs
    auto pair_ok = [&](const Interval& a, const Interval& b) {
        const double iou = iou_1d(a, b), giou = giou_1d(a, b);
        c.expect(giou <= iou + 1e-15, "gIoU above IoU");
        c.expect(giou > -1.0 && giou <= 1.0 && iou >= 0.0 && iou <= 1.0, "range violated");
        c.expect(iou == iou_1d(b, a) && giou == giou_1d(b, a), "asymmetry");
    };
    std::size_t pairs = 0;
    const int steps = 24;
    for (int a1 = 0; a1 < steps; ++a1)
        for (int a2 = a1 + 1; a2 <= steps; ++a2)
            for (int b1 = 0; b1 < steps; ++b1)
                for (int b2 = b1 + 1; b2 <= steps; ++b2, ++pairs)
                    pair_ok(Interval::from_bounds(a1 / double(steps), a2 / double(steps)), Interval::from_bounds(b1 / double(steps), b2 / double(steps)));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        double a1 = u(rng), a2 = u(rng), b1 = u(rng), b2 = u(rng);
        if (a1 == a2 || b1 == b2) continue;
        pair_ok(Interval::from_bounds(std::min(a1, a2), std::max(a1, a2)), Interval::from_bounds(std::min(b1, b2), std::max(b1, b2)));
        ++pairs;
    }
    if (c.out.pass) c.out.detail = std::to_string(spans) + " spans round-tripped, " + std::to_string(pairs) + " interval pairs";
    return c.out;
}

// ------------------------------------------------------------------ 4

DecoderOutput layered_output(const std::vector<std::vector<double>>& cw, const std::vector<std::vector<double>>& lg, std::size_t n, std::size_t nd) {
    DecoderOutput out;
    out.num_learnable = n;
    out.num_denoising = nd;
    for (std::size_t l = 0; l < cw.size(); ++l) out.layers.push_back({Tensor::from({n + nd, 2}, cw[l]), Tensor::from({n + nd, 1}, lg[l])});
    return out;
}

Outcome loss_oracle() {
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> c(0.15, 0.85), w(0.05, 0.3), z(-2.5, 2.5);
    std::uniform_int_distribution<std::size_t> nlayers(1, 4), ngroups(0, 3);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::vector<Interval> gts{{c(rng), w(rng)}, {c(rng), w(rng)}};
        const std::size_t groups = ngroups(rng);
        const auto dn = make_denoising(gts, {groups, 0.4, 0.4}, rng);
        const std::size_t n = 3, nd = dn.size(), layers = nlayers(rng);
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
        double expect = 0.0;
        for (const auto& s : scalar) expect += support::scalar_layer_objective(s, gts, dn.target, {10.0, 1.0, 4.0, 9.0, 3.0});
        const double got = composite_loss(layered_output(cw, lg, n, nd), nd ? &dn : nullptr, gts).total.item();
        worst = std::max(worst, std::abs(got - expect));
    }
    return {worst <= 1e-9, fmt("50 instances, max abs diff %.2e", worst)};
}

// ------------------------------------------------------------------ 5

Outcome denoising_invariance() {
    ModelConfig cfg;
    cfg.d_model = 12;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.num_queries = 4;
    cfg.max_tokens = 64;
    Check c;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        DetectionTransformer m(cfg, seed);
        std::mt19937_64 rng(seed);
        ModelInput in{support::randn(rng, {7, 12}), {}};
        for (std::size_t i = 0; i < 7; ++i) in.positions.push_back((i + 0.5) / 7.0);
        const std::vector<Interval> gts{{0.3, 0.2}, {0.7, 0.15}};
        const auto base = m.predict(in);
        std::vector<double> base_loss;
        std::vector<std::vector<double>> base_grad;
        for (std::size_t groups : {0u, 1u, 5u}) {
            const auto dn = make_denoising(gts, {groups, 0.4, 0.4}, rng);
            const DenoisingBatch* dp = dn.empty() ? nullptr : &dn;
            const auto p = m.predict(in, dp);
            bool same = p.intervals == base.intervals && p.scores == base.scores;
            for (std::size_t l = 0; l < base.aux.size(); ++l) same = same && p.aux[l].intervals == base.aux[l].intervals && p.aux[l].scores == base.aux[l].scores;
            c.expect(same, "inference differs with " + std::to_string(groups) + " groups");

            const Binding b(m.params(), true);
            const auto lb = composite_loss(m.forward(b, in, dp), dp, gts);
            const double v = lb.learnable_total.item();
            backward(lb.learnable_total);
            const auto g = b.gradients();
            if (groups == 0) {
                base_loss = {v};
                base_grad = g;
            } else {
                c.expect(v == base_loss[0], "learnable loss differs with " + std::to_string(groups) + " groups");
                c.expect(g == base_grad, "learnable gradient differs with " + std::to_string(groups) + " groups");
            }
        }
    }
    if (c.out.pass) c.out.detail = "5 models, groups 0/1/5: outputs bitwise equal, learnable loss and gradients equal";
    return c.out;
}

// ------------------------------------------------------------------ 6

Outcome metric_upper_bounds() {
    std::vector<std::string> s;
    for (int i = 0; i < 10; ++i) s.push_back("Sentence number " + std::to_string(i) + " reads well.");
    std::vector<AnnotatedText> gold;
    for (int b = 1; b <= 9; ++b) gold.push_back(roft_to_intervals(s, b, "one-" + std::to_string(b)));
    gold.push_back(tribert_to_intervals(s, {0, 0, 1, 1, 1, 0, 0, 0, 0, 0}, "two-a"));
    gold.push_back(tribert_to_intervals(s, {1, 1, 0, 0, 0, 0, 0, 1, 1, 1}, "two-b"));
    gold.push_back(tribert_to_intervals(s, {0, 1, 1, 0, 0, 0, 1, 1, 1, 1}, "three-a"));
    gold.push_back(tribert_to_intervals(s, {0, 1, 0, 1, 1, 1, 1, 1, 0, 0}, "three-b"));
    std::vector<TextPrediction> oracle;
    for (const auto& g : gold) oracle.push_back({g.id, g.intervals, std::vector<double>(g.intervals.size(), 1.0)});
    const auto report = evaluate(gold, oracle, {});
    const auto& by = report["f1_at_k"]["by_gt_boundaries"];
    Check c;
    const double f1[3] = {by["1"]["f1"].get<double>(), by["2"]["f1"].get<double>(), by["3"]["f1"].get<double>()};
    c.expect(std::abs(f1[0] - 0.5) < 1e-12 && std::abs(f1[1] - 0.8) < 1e-12 && std::abs(f1[2] - 1.0) < 1e-12,
             fmt("F1@3 groups %.4f %.4f %.4f", f1[0], f1[1], f1[2]));
    c.expect(report["sentence_kappa"].get<double>() == 1.0, "kappa on identical labels");
    const std::vector<int> labels{0, 1, 2, 2, 1, 0, 0, 2};
    c.expect(kappa(labels, labels) == 1.0, "kappa of a labeling with itself");
    const auto bs = boundary_suite({2, 4, 6, 8}, {3, 3, 7, 9});
    c.expect(bs.soft_acc1 == 1.0 && bs.acc == 0.0, "SoftAcc1 with off-by-one errors");
    if (c.out.pass) c.out.detail = fmt("F1@3 %.1f/%.1f/%.1f, kappa 1, SoftAcc1 %.1f", f1[0], f1[1], f1[2], bs.soft_acc1);
    return c.out;
}

// ------------------------------------------------------------------ 7

Outcome postprocessing_rules() {
    const auto f = support::fixture_500();
    Check c;
    for (std::size_t t = 0; t < 500; ++t)
        c.expect(interval_to_sentence(t, f.sentences) == support::oracle_sentence_index(t, f.sentences), "interval_to_sentence at " + std::to_string(t));
    std::size_t n = 0;
    for (std::size_t a = 0; a < 500; ++a)
        for (std::size_t b = a + 1; b <= 500; ++b, ++n) {
            const std::vector<CharSpan> iv{{a, b}};
            c.expect(overlap_labels(f.sentences, iv, 0.94) == support::oracle_overlap_labels(f.sentences, iv, 500, 0.94),
                     "overlap_labels at [" + std::to_string(a) + ", " + std::to_string(b) + ")");
            c.expect(snap_boundaries(iv, f.sentences) == support::oracle_snap_boundaries(f.sentences, iv),
                     "snap_boundaries at [" + std::to_string(a) + ", " + std::to_string(b) + ")");
        }
    if (c.out.pass) c.out.detail = "500 positions and " + std::to_string(n) + " intervals match the character-level oracle";
    return c.out;
}

// ------------------------------------------------------------------ 8

struct RunResult {
    double acc = 0, mse = 0;
};

ModelConfig e2e_model() {
    ModelConfig mc;
    mc.d_model = 32;
    mc.hidden = 32;
    mc.heads = 4;
    mc.num_queries = 1;
    mc.max_tokens = 256;
    return mc;
}

TrainConfig e2e_train() {
    TrainConfig tc;
    tc.epochs = 10;
    tc.batch_size = 32;
    tc.lr = 1e-3;
    tc.seed = 1;
    return tc;
}

RunResult train_and_score(double sigma) {
    SynthSpec spec;
    spec.n_texts = 2000;
    spec.signal = sigma;
    const auto split = synth_generate(spec, 11);
    const SignalProvider provider(32, 11, sigma);
    const auto mc = e2e_model();
    const auto train_set = prepare_samples(split.train, provider, mc);
    const auto val_set = prepare_samples(split.val, provider, mc);
    const auto test_set = prepare_samples(split.test, provider, mc);
    DetectionTransformer model(mc, 1);
    const auto result = train(model, train_set, val_set, e2e_train());
    const DetectionTransformer best(mc, result.best_params.clone());
    std::vector<TextPrediction> preds;
    for (const auto& s : test_set) preds.push_back(predict_sample(best, s));
    const auto report = evaluate(split.test, preds, {});
    return {report["boundary"]["acc"].get<double>(), report["boundary"]["mse"].get<double>()};
}

Outcome end_to_end_learning() {
    const auto signal = train_and_score(5.0);
    const auto control = train_and_score(0.0);
    const double chance = 1.0 / 9.0;  // boundary uniform over sentences 1..9
    Check c;
    c.expect(signal.acc >= 0.9, fmt("sigma=5 Acc %.3f < 0.9", signal.acc));
    c.expect(signal.mse <= 0.5, fmt("sigma=5 MSE %.3f > 0.5", signal.mse));
    c.expect(std::abs(control.acc - chance) <= 0.1, fmt("sigma=0 Acc %.3f not within 0.1 of %.3f", control.acc, chance));
    if (c.out.pass) c.out.detail = fmt("sigma=5 Acc %.3f MSE %.3f; sigma=0 Acc %.3f (chance %.3f)", signal.acc, signal.mse, control.acc, chance);
    return c.out;
}

// ------------------------------------------------------------------ 9

Outcome reproducibility() {
    Check c;
    SynthSpec spec;
    spec.n_texts = 300;
    const auto dir = scratch("repro");
    save_split(dir / "g1", synth_generate(spec, 5));
    save_split(dir / "g2", synth_generate(spec, 5));
    for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl"})
        c.expect(slurp(dir / "g1" / f) == slurp(dir / "g2" / f), std::string("generated ") + f + " differs");

    {
        std::ofstream os(dir / "roft.jsonl");
        for (int i = 0; i < 30; ++i)
            os << R"({"id": "r)" << i << R"(", "sentences": ["Alpha one.", "Beta two.", "Gamma three.", "Delta four."], "boundary": )" << (i % 5) << "}\n";
    }
    for (int k = 0; k < 2; ++k) {
        ConversionStats stats;
        save_records(dir / ("c" + std::to_string(k) + ".jsonl"), convert_file(SourceFormat::roft, dir / "roft.jsonl", true, stats));
    }
    c.expect(slurp(dir / "c0.jsonl") == slurp(dir / "c1.jsonl"), "converted records differ");

    const auto split = load_split(dir / "g1");
    ModelConfig mc = e2e_model();
    mc.d_model = 16;
    mc.hidden = 16;
    mc.heads = 2;
    const SignalProvider provider(16, 5, 5.0);
    const auto tr = prepare_samples(split.train, provider, mc);
    const auto va = prepare_samples(split.val, provider, mc);
    TrainConfig tc = e2e_train();
    tc.epochs = 3;
    std::vector<std::string> logs[2];
    for (int k = 0; k < 2; ++k) {
        DetectionTransformer m(mc, tc.seed);
        for (const auto& e : train(m, tr, va, tc).logs) {
            auto j = to_json(e);
            j.erase("seconds");
            logs[k].push_back(j.dump());
        }
        save_checkpoint(dir / ("m" + std::to_string(k) + ".ckpt"), m);
    }
    c.expect(logs[0] == logs[1], "epoch logs differ");
    c.expect(slurp(dir / "m0.ckpt") == slurp(dir / "m1.ckpt"), "checkpoints differ");
    if (c.out.pass) c.out.detail = "generation, conversion, epoch logs and checkpoints byte-identical";
    fs::remove_all(dir);
    return c.out;
}

// ------------------------------------------------------------------ 10

Outcome classification_head() {
    const std::size_t d = 16;
    std::mt19937_64 rng(10);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> dir(d);
    for (auto& x : dir) x = noise(rng);
    double norm = 0;
    for (double x : dir) norm += x * x;
    for (auto& x : dir) x /= std::sqrt(norm);
    auto make = [&](std::size_t n) {
        std::vector<ClassifierSample> out;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t label = i % 2, rows = 4 + i % 5;
            std::vector<double> v(rows * d);
            for (auto& x : v) x = noise(rng);
            for (std::size_t k = 0; k < d; ++k) v[(rows - 1) * d + k] += (label ? 2.5 : -2.5) * dir[k];
            out.push_back({Tensor::from({rows, d}, v), label});
        }
        return out;
    };
    const auto train_set = make(400), test_set = make(200);
    ClassifierHead head({d, 32, 2}, 10);
    train_classifier(head, train_set, {30, 16, 1e-2, 1e-4, 10});
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& s : test_set) {
        scores.push_back(head.classify(s.embeddings)[1]);
        labels.push_back(static_cast<int>(s.label));
    }
    const auto cs = classification_suite(scores, labels);
    Check c;
    c.expect(cs.acc >= 0.95, fmt("accuracy %.3f", cs.acc));
    c.expect(cs.auroc >= 0.98, fmt("AUROC %.4f", cs.auroc));
    c.expect(cs.auroc == support::brute_force_auroc(scores, labels), "AUROC differs from pairwise oracle on the test set");
    std::mt19937_64 r2(99);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + r2() % 199;
        std::vector<double> s(n);
        std::vector<int> l(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = t % 2 ? static_cast<double>(r2() % 10) / 10.0 : std::uniform_real_distribution<double>()(r2);
            l[i] = static_cast<int>(r2() % 2);
        }
        l[0] = 0;
        l[1] = 1;
        c.expect(auroc(s, l) == support::brute_force_auroc(s, l), "AUROC differs from pairwise oracle on random set " + std::to_string(t));
    }
    if (c.out.pass) c.out.detail = fmt("accuracy %.3f, AUROC %.4f; 200 random sets match the pairwise oracle", cs.acc, cs.auroc);
    return c.out;
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0 means no time limit
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "gradient fidelity", 120, gradient_fidelity},
        {2, "matching oracle", 10, matching_oracle},
        {3, "geometry algebra", 0, geometry_algebra},
        {4, "composite loss oracle", 0, loss_oracle},
        {5, "denoising mask invariance", 0, denoising_invariance},
        {6, "metric upper bounds", 0, metric_upper_bounds},
        {7, "post-processing rules", 0, postprocessing_rules},
        {8, "end-to-end learning", 900, end_to_end_learning},
        {9, "reproducibility", 0, reproducibility},
        {10, "classification head", 0, classification_head},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = cr.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.pass && cr.budget_s > 0 && secs > cr.budget_s) o = {false, o.detail + fmt("; took %.1fs, budget %.0fs", secs, cr.budget_s)};
        if (!o.pass) ++failed;
        std::printf("%s criterion %d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", cr.id, cr.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
