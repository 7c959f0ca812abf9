#pragma once

// Randomized gradient-check cases shared by the unit tests and the
// acceptance runner. Inputs are drawn away from kinks (relu at 0, abs at 0,
// min/max ties, clamps) so central differences are meaningful.

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "spandet/geometry.hpp"
#include "spandet/gradcheck.hpp"
#include "spandet/loss.hpp"
#include "spandet/model.hpp"
#include "spandet/ops.hpp"

namespace spandet::support {

struct GradCase {
    std::string name;
    std::function<std::vector<Tensor>(std::mt19937_64&)> inputs;
    ScalarFnN f;
};

// Fixed, shape-dependent weights so every output element carries its own
// sensitivity into the scalar.
inline Tensor project_scalar(const Tensor& t) {
    std::vector<double> w(t.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::cos(0.37 * static_cast<double>(i) + 0.1) + 0.3;
    return sum(mul(t, Tensor::from(t.shape(), std::move(w))));
}

inline Tensor randn(std::mt19937_64& rng, Shape shape) {
    std::normal_distribution<double> d;
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = d(rng);
    return Tensor::from(std::move(shape), std::move(v));
}

inline Tensor uniform(std::mt19937_64& rng, Shape shape, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = d(rng);
    return Tensor::from(std::move(shape), std::move(v));
}

// |x| >= 0.1, random sign.
inline Tensor away_from_zero(std::mt19937_64& rng, Shape shape) {
    std::uniform_real_distribution<double> mag(0.1, 2.0);
    std::bernoulli_distribution sign;
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = sign(rng) ? mag(rng) : -mag(rng);
    return Tensor::from(std::move(shape), std::move(v));
}

inline Tensor intervals(std::mt19937_64& rng, std::size_t k) {
    std::uniform_real_distribution<double> c(0.2, 0.8), w(0.1, 0.5);
    std::vector<double> v;
    for (std::size_t i = 0; i < k; ++i) {
        v.push_back(c(rng));
        v.push_back(w(rng));
    }
    return Tensor::from({k, 2}, std::move(v));
}

inline std::vector<GradCase> op_grad_cases() {
    using V = std::vector<Tensor>;
    std::vector<GradCase> cases;
    auto add_case = [&](std::string name, std::function<V(std::mt19937_64&)> in, ScalarFnN f) {
        cases.push_back({std::move(name), std::move(in), std::move(f)});
    };
    auto one = [](Shape s) { return [s](std::mt19937_64& r) { return V{randn(r, s)}; }; };
    auto two = [](Shape a, Shape b) { return [a, b](std::mt19937_64& r) { return V{randn(r, a), randn(r, b)}; }; };

    add_case("matmul", two({3, 4}, {4, 2}), [](const V& x) { return project_scalar(matmul(x[0], x[1])); });
    add_case("transpose", one({3, 5}), [](const V& x) { return project_scalar(transpose(x[0])); });
    add_case("add", two({3, 4}, {3, 4}), [](const V& x) { return project_scalar(x[0] + x[1]); });
    add_case("add_row_bias", two({3, 4}, {1, 4}), [](const V& x) { return project_scalar(x[0] + x[1]); });
    add_case("add_scalar", two({3, 4}, {1}), [](const V& x) { return project_scalar(x[0] + x[1]); });
    add_case("sub", two({2, 3}, {2, 3}), [](const V& x) { return project_scalar(x[0] - x[1]); });
    add_case("mul", two({2, 3}, {2, 3}), [](const V& x) { return project_scalar(x[0] * x[1]); });
    add_case("div", [](std::mt19937_64& r) { return V{randn(r, {2, 3}), away_from_zero(r, {2, 3})}; },
             [](const V& x) { return project_scalar(x[0] / x[1]); });
    add_case("scale", one({4, 2}), [](const V& x) { return project_scalar(scale(x[0], -1.7)); });
    add_case("shift", one({4, 2}), [](const V& x) { return project_scalar(shift(x[0], 0.3)); });
    add_case("concat_rows", two({2, 3}, {4, 3}), [](const V& x) { return project_scalar(concat({x[0], x[1]}, 0)); });
    add_case("concat_cols", two({3, 2}, {3, 5}), [](const V& x) { return project_scalar(concat({x[0], x[1]}, 1)); });
    add_case("slice_rows", one({5, 3}), [](const V& x) { return project_scalar(slice(x[0], 0, 1, 4)); });
    add_case("slice_cols", one({3, 6}), [](const V& x) { return project_scalar(slice(x[0], 1, 2, 5)); });
    add_case("index_rows", one({4, 3}), [](const V& x) { return project_scalar(index_rows(x[0], {2, 0, 2, 3})); });
    add_case("softmax_rows", one({3, 5}), [](const V& x) { return project_scalar(softmax(x[0], -1)); });
    add_case("softmax_cols", one({4, 3}), [](const V& x) { return project_scalar(softmax(x[0], 0)); });
    add_case("softmax_masked", one({3, 4}), [](const V& x) {
        return project_scalar(softmax(x[0], -1, {0, 1, 0, 0, 1, 0, 1, 0, 0, 0, 0, 1}));
    });
    add_case("layer_norm", [](std::mt19937_64& r) { return V{randn(r, {3, 6}), randn(r, {1, 6}), randn(r, {1, 6})}; },
             [](const V& x) { return project_scalar(layer_norm(x[0], x[1], x[2])); });
    add_case("relu", [](std::mt19937_64& r) { return V{away_from_zero(r, {3, 4})}; },
             [](const V& x) { return project_scalar(relu(x[0])); });
    add_case("sigmoid", one({3, 4}), [](const V& x) { return project_scalar(sigmoid(x[0])); });
    add_case("inverse_sigmoid", [](std::mt19937_64& r) { return V{uniform(r, {3, 4}, 0.05, 0.95)}; },
             [](const V& x) { return project_scalar(inverse_sigmoid(x[0])); });
    add_case("exp", one({3, 4}), [](const V& x) { return project_scalar(exp(x[0])); });
    add_case("log", [](std::mt19937_64& r) { return V{uniform(r, {3, 4}, 0.2, 3.0)}; },
             [](const V& x) { return project_scalar(log(x[0])); });
    add_case("abs", [](std::mt19937_64& r) { return V{away_from_zero(r, {3, 4})}; },
             [](const V& x) { return project_scalar(abs(x[0])); });
    auto tie_free = [](std::mt19937_64& r) {
        Tensor a = randn(r, {3, 4});
        return V{a, a + away_from_zero(r, {3, 4})};
    };
    add_case("minimum", tie_free, [](const V& x) { return project_scalar(minimum(x[0], x[1])); });
    add_case("maximum", tie_free, [](const V& x) { return project_scalar(maximum(x[0], x[1])); });
    add_case("pow_scalar", [](std::mt19937_64& r) { return V{uniform(r, {3, 4}, 0.2, 2.0)}; },
             [](const V& x) { return project_scalar(pow_scalar(x[0], 1.7)); });
    add_case("sum", one({3, 4}), [](const V& x) { return sum(x[0]); });
    add_case("mean", one({3, 4}), [](const V& x) { return scale(mean(x[0]), 3.0); });
    add_case("sinusoid_embed", [](std::mt19937_64& r) { return V{uniform(r, {3, 2}, 0.0, 1.0)}; },
             [](const V& x) { return project_scalar(sinusoid_embed(x[0], 8, 10000.0)); });
    add_case("giou_1d", [](std::mt19937_64& r) { return V{intervals(r, 4), intervals(r, 4)}; },
             [](const V& x) { return project_scalar(giou_1d(x[0], x[1])); });
    add_case("span_l1", [](std::mt19937_64& r) { return V{intervals(r, 4), intervals(r, 4)}; },
             [](const V& x) { return project_scalar(span_l1(x[0], x[1])); });
    add_case("focal_loss", one({5, 1}),
             [](const V& x) { return sum(focal_loss(x[0], {1, 0, 0, 1, 0}, FocalParams{})); });
    add_case("attention", [](std::mt19937_64& r) { return V{randn(r, {3, 4}), randn(r, {5, 4}), randn(r, {5, 4})}; },
             [](const V& x) { return project_scalar(multi_head_attention({x[0]}, {x[1]}, x[2], 2)); });
    add_case("attention_split_parts",
             [](std::mt19937_64& r) {
                 return V{randn(r, {2, 4}), randn(r, {2, 4}), randn(r, {3, 4}), randn(r, {3, 4}), randn(r, {3, 4})};
             },
             [](const V& x) { return project_scalar(multi_head_attention({x[0], x[1]}, {x[2], x[3]}, x[4], 2)); });
    return cases;
}

// Tiny end-to-end configuration: 2 tokens, 1 learnable query, every decoder
// layer differentiable through its anchors so finite differences agree.
inline ModelConfig tiny_model_config() {
    ModelConfig cfg;
    cfg.d_model = 4;
    cfg.hidden = 4;
    cfg.heads = 2;
    cfg.enc_layers = 1;
    cfg.dec_layers = 3;
    cfg.ffn_mult = 2;
    cfg.num_queries = 1;
    cfg.max_tokens = 8;
    cfg.dn_groups = 1;
    cfg.detach_anchors = false;
    return cfg;
}

inline bool far_from_kinks(const DecoderOutput& out, const DenoisingBatch& dn, const std::vector<Interval>& gts, double margin) {
    for (const auto& layer : out.layers) {
        const auto v = layer.intervals.to_vector();
        for (std::size_t q = 0; q < out.num_learnable + out.num_denoising; ++q) {
            const Interval p{v[2 * q], v[2 * q + 1]};
            const std::size_t t = q < out.num_learnable ? std::min(q, gts.size() - 1) : dn.target[q - out.num_learnable];
            const Interval& g = gts[t];
            for (double d : {p.c - g.c, p.w - g.w, p.lo() - g.lo(), p.hi() - g.hi(), p.hi() - g.lo(), g.hi() - p.lo()})
                if (std::abs(d) < margin) return false;
        }
    }
    return true;
}

// Worst relative error of the composite loss gradient over every model
// parameter and every input embedding value. Parameters are perturbed in
// place through their shared buffers.
inline double model_grad_error(std::uint64_t seed, double eps = 1e-5) {
    std::mt19937_64 rng(seed);
    const ModelConfig cfg = tiny_model_config();
    DetectionTransformer model(cfg, seed);
    // Non-zero box head so the refinement path carries gradient everywhere.
    for (std::size_t i = 0; i < model.params().size(); ++i) {
        auto& v = *model.params()[i].value;
        std::normal_distribution<double> jitter(0.0, 0.2);
        for (auto& x : v) x += jitter(rng);
    }
    ModelInput input{randn(rng, {2, cfg.d_model}), {0.25, 0.75}};
    std::uniform_real_distribution<double> c(0.3, 0.7), w(0.2, 0.5);
    std::vector<Interval> gts;
    DenoisingBatch dn;
    // Redraw until every prediction sits 1e-3 away from the kinks of the
    // box terms (|dc|, |dw|, endpoint ties, touching intervals).
    for (int attempt = 0; attempt < 1000; ++attempt) {
        gts = {{c(rng), w(rng)}};
        dn = make_denoising(gts, cfg.denoising(), rng);
        if (far_from_kinks(model.forward(Binding(model.params(), false), input, &dn), dn, gts, 1e-3)) break;
    }

    auto loss_of = [&](const Binding& b, const Tensor& emb) {
        ModelInput in{emb, input.positions};
        return composite_loss(model.forward(b, in, &dn), &dn, gts).total;
    };

    const Tensor emb_leaf = Tensor::from(input.embeddings.shape(), input.embeddings.to_vector(), true);
    const Binding grad_binding(model.params(), true);
    backward(loss_of(grad_binding, emb_leaf));
    const auto grads = grad_binding.gradients();

    double worst = 0.0;
    auto fold = [&](double analytic, double numeric) {
        worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)));
    };
    const Binding frozen(model.params(), false);
    for (std::size_t p = 0; p < model.params().size(); ++p) {
        auto& v = *model.params()[p].value;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double keep = v[i];
            v[i] = keep + eps;
            const double up = loss_of(frozen, input.embeddings).item();
            v[i] = keep - eps;
            const double down = loss_of(frozen, input.embeddings).item();
            v[i] = keep;
            fold(grads[p][i], (up - down) / (2 * eps));
        }
    }
    const auto eg = emb_leaf.grad();
    auto base = input.embeddings.to_vector();
    for (std::size_t i = 0; i < base.size(); ++i) {
        auto probe = [&](double delta) {
            auto v = base;
            v[i] += delta;
            return loss_of(frozen, Tensor::from(input.embeddings.shape(), std::move(v))).item();
        };
        fold(eg.empty() ? 0.0 : eg[i], (probe(eps) - probe(-eps)) / (2 * eps));
    }
    return worst;
}

}  // namespace spandet::support
