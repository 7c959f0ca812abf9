#include "spandet/denoising.hpp"

#include <algorithm>

namespace spandet {

namespace {
constexpr double kMinWidth = 1e-4;
}

std::vector<std::uint8_t> DenoisingBatch::attention_mask(std::size_t num_learnable) const {
    const std::size_t q = num_learnable + size();
    std::vector<std::uint8_t> mask(q * q, 0);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = num_learnable; j < q; ++j) {
            const bool row_learnable = i < num_learnable;
            if (row_learnable || group[i - num_learnable] != group[j - num_learnable]) mask[i * q + j] = 1;
        }
    return mask;
}

DenoisingBatch make_denoising(std::span<const Interval> gts, const DenoisingConfig& cfg, std::mt19937_64& rng) {
    DenoisingBatch batch;
    if (gts.empty() || cfg.groups == 0) return batch;
    batch.groups = cfg.groups;
    batch.gts.assign(gts.begin(), gts.end());
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (std::size_t g = 0; g < cfg.groups; ++g)
        for (std::size_t m = 0; m < gts.size(); ++m) {
            const Interval& gt = gts[m];
            // Draw both variates unconditionally so the stream does not depend on the noise scales.
            const double u = unit(rng) * cfg.center_noise;
            const double v = unit(rng) * cfg.width_noise;
            Interval noised{gt.c + u * gt.w, gt.w * (1.0 + v)};
            noised.w = std::clamp(noised.w, kMinWidth, 1.0);
            if (noised.lo() < 0.0 || noised.hi() > 1.0) {
                const double lo = std::clamp(noised.lo(), 0.0, 1.0 - kMinWidth);
                const double hi = std::clamp(noised.hi(), lo + kMinWidth, 1.0);
                noised = Interval::from_bounds(lo, hi);
            }
            batch.anchors.push_back(noised);
            batch.target.push_back(m);
            batch.group.push_back(g);
        }
    return batch;
}

}  // namespace spandet
