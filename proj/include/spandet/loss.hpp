#pragma once

// Detection objective: per decoder layer, learnable queries are matched to
// ground truth with the Hungarian algorithm and scored with L1 + gIoU on
// matched pairs and a sigmoid focal loss over every query; denoising
// queries are matched by construction and add their own L1 + gIoU terms.

#include <span>
#include <vector>

#include "spandet/denoising.hpp"
#include "spandet/geometry.hpp"
#include "spandet/matching.hpp"
#include "spandet/model.hpp"
#include "spandet/tensor.hpp"

namespace spandet {

struct LossWeights {
    double span = 10.0;
    double giou = 1.0;
    double focal = 4.0;
    double dn_span = 9.0;
    double dn_giou = 3.0;
};

struct FocalParams {
    double alpha = 0.25;
    double gamma = 2.0;
};

/// -alpha_t (1 - p_t)^gamma log(p_t), p = sigmoid(logit).
double focal_loss(double logit, int target, double alpha, double gamma);
/// Element-wise focal loss for a [k, 1] logit column; targets are 0 or 1.
Tensor focal_loss(const Tensor& logits, const std::vector<double>& targets, const FocalParams& fp);

struct LossOptions {
    LossWeights weights;
    FocalParams focal;
    MatchWeights match;
    bool aux_layers = true;  // add the same terms for every intermediate decoder layer
};

/// Unweighted terms of one decoder layer.
struct LossTerms {
    double span = 0.0;
    double giou = 0.0;
    double focal = 0.0;
    double dn_span = 0.0;
    double dn_giou = 0.0;
};

struct LossBreakdown {
    Tensor total;            // weighted sum over counted layers, all terms
    Tensor learnable_total;  // same without the denoising terms
    std::vector<LossTerms> layers;
    std::vector<Assignment> assignments;

    const LossTerms& final_terms() const { return layers.back(); }
};

/// L_span and L_giou are means over matched pairs (over denoising queries
/// for the dn terms); L_focal sums over all learnable queries and divides
/// by max(1, #gt). Matching sees detached predictions only.
LossBreakdown composite_loss(const DecoderOutput& out, const DenoisingBatch* dn, std::span<const Interval> gts,
                             const LossOptions& opts = {});

}  // namespace spandet
