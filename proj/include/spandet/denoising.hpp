#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "spandet/geometry.hpp"

namespace spandet {

struct DenoisingConfig {
    std::size_t groups = 5;
    double center_noise = 0.4;  // c' = c + u * w,  u ~ U[-center_noise, center_noise]
    double width_noise = 0.4;   // w' = w * (1 + v), v ~ U[-width_noise, width_noise]
};

/// Noised copies of the ground-truth intervals, laid out group-major:
/// query k belongs to group k / gts.size() and reconstructs gts[k % gts.size()].
struct DenoisingBatch {
    std::size_t groups = 0;
    std::vector<Interval> anchors;
    std::vector<std::size_t> target;
    std::vector<std::size_t> group;
    std::vector<Interval> gts;

    std::size_t size() const { return anchors.size(); }
    bool empty() const { return anchors.empty(); }

    /// Row-major [q, q] mask over (learnable + denoising) queries, nonzero =
    /// blocked. Learnable queries never see denoising queries, and a
    /// denoising query only sees learnable queries and its own group.
    std::vector<std::uint8_t> attention_mask(std::size_t num_learnable) const;
};

DenoisingBatch make_denoising(std::span<const Interval> gts, const DenoisingConfig& cfg, std::mt19937_64& rng);

}  // namespace spandet
