#include "spandet/loss.hpp"

#include <algorithm>
#include <cmath>

#include "spandet/ops.hpp"

namespace spandet {

double focal_loss(double logit, int target, double alpha, double gamma) {
    const double p = 1.0 / (1.0 + std::exp(-logit));
    const double pt = target ? p : 1.0 - p;
    const double at = target ? alpha : 1.0 - alpha;
    return -at * std::pow(1.0 - pt, gamma) * std::log(std::max(pt, 1e-12));
}

Tensor focal_loss(const Tensor& logits, const std::vector<double>& targets, const FocalParams& fp) {
    const Shape shape = logits.shape();
    std::vector<double> sign(targets.size()), alpha_t(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        sign[i] = targets[i] > 0.5 ? 1.0 : -1.0;
        alpha_t[i] = targets[i] > 0.5 ? fp.alpha : 1.0 - fp.alpha;
    }
    // p_t = sigmoid(s * z) with s = +1 for positives and -1 for negatives.
    const Tensor pt = sigmoid(mul(logits, Tensor::from(shape, std::move(sign))));
    const Tensor modulating = pow_scalar(shift(scale(pt, -1.0), 1.0), fp.gamma);
    return scale(mul(mul(Tensor::from(shape, std::move(alpha_t)), modulating), log(pt)), -1.0);
}

namespace {

Tensor interval_tensor(std::span<const Interval> ivs) {
    std::vector<double> v;
    v.reserve(ivs.size() * 2);
    for (const auto& iv : ivs) {
        v.push_back(iv.c);
        v.push_back(iv.w);
    }
    return Tensor::from({ivs.size(), 2}, std::move(v));
}

}  // namespace

LossBreakdown composite_loss(const DecoderOutput& out, const DenoisingBatch* dn, std::span<const Interval> gts,
                             const LossOptions& opts) {
    const LossWeights& w = opts.weights;
    const std::size_t m = gts.size();
    const bool use_dn = dn != nullptr && !dn->empty() && out.num_denoising > 0;
    const std::size_t first = opts.aux_layers ? 0 : out.layers.size() - 1;

    LossBreakdown result;
    Tensor total, learnable;
    auto accumulate = [](Tensor& acc, const Tensor& term) { acc = acc.defined() ? acc + term : term; };

    for (std::size_t l = first; l < out.layers.size(); ++l) {
        LossTerms terms;
        const Tensor ivs = out.learnable_intervals(l);
        const Tensor logits = out.learnable_logits(l);
        const std::size_t n = ivs.rows();

        std::vector<ScoredInterval> scored(n);
        for (std::size_t q = 0; q < n; ++q)
            scored[q] = {{ivs.at(q, 0), ivs.at(q, 1)}, 1.0 / (1.0 + std::exp(-logits.at(q, 0)))};
        Assignment match = hungarian(build_match_cost(scored, gts, opts.match));

        std::vector<double> targets(n, 0.0);
        for (const auto& [q, g] : match.pairs) targets[q] = 1.0;
        const Tensor focal = scale(sum(focal_loss(logits, targets, opts.focal)), 1.0 / static_cast<double>(std::max<std::size_t>(1, m)));
        terms.focal = focal.item();
        Tensor layer_learnable = scale(focal, w.focal);

        if (m > 0) {
            std::vector<std::size_t> rows;
            std::vector<Interval> matched_gt;
            for (const auto& [q, g] : match.pairs) {
                rows.push_back(q);
                matched_gt.push_back(gts[g]);
            }
            const Tensor pred = index_rows(ivs, rows);
            const Tensor target = interval_tensor(matched_gt);
            const double inv_m = 1.0 / static_cast<double>(m);
            const Tensor l_span = scale(sum(span_l1(pred, target)), inv_m);
            const Tensor l_giou = scale(sum(shift(scale(giou_1d(pred, target), -1.0), 1.0)), inv_m);
            terms.span = l_span.item();
            terms.giou = l_giou.item();
            layer_learnable = layer_learnable + scale(l_span, w.span) + scale(l_giou, w.giou);
        }
        Tensor layer_total = layer_learnable;

        if (use_dn) {
            std::vector<Interval> dn_targets;
            for (auto t : dn->target) dn_targets.push_back(dn->gts[t]);
            const Tensor pred = out.denoising_intervals(l);
            const Tensor target = interval_tensor(dn_targets);
            const double inv_d = 1.0 / static_cast<double>(dn_targets.size());
            const Tensor l_span = scale(sum(span_l1(pred, target)), inv_d);
            const Tensor l_giou = scale(sum(shift(scale(giou_1d(pred, target), -1.0), 1.0)), inv_d);
            terms.dn_span = l_span.item();
            terms.dn_giou = l_giou.item();
            layer_total = layer_total + scale(l_span, w.dn_span) + scale(l_giou, w.dn_giou);
        }

        accumulate(total, layer_total);
        accumulate(learnable, layer_learnable);
        result.layers.push_back(terms);
        result.assignments.push_back(std::move(match));
    }
    result.total = total;
    result.learnable_total = learnable;
    return result;
}

}  // namespace spandet
