#pragma once

// Interval detection transformer: a linear projection of per-token
// embeddings, a post-norm transformer encoder with sinusoidal token
// positions, and a decoder driven by learnable (center, width) anchor
// queries that are refined additively in logit space after every layer.
// Optional denoising queries (noised ground truth) share the decoder but
// are hidden from the learnable queries by the self-attention mask.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spandet/denoising.hpp"
#include "spandet/geometry.hpp"
#include "spandet/params.hpp"
#include "spandet/tensor.hpp"

namespace spandet {

struct ModelConfig {
    std::size_t d_model = 4096;
    std::size_t hidden = 0;  // 0 means d_model / 16
    std::size_t enc_layers = 3;
    std::size_t dec_layers = 3;
    std::size_t heads = 8;
    std::size_t ffn_mult = 4;
    std::size_t num_queries = 1;
    std::size_t max_tokens = 512;
    std::size_t dn_groups = 5;
    double dn_center_noise = 0.4;
    double dn_width_noise = 0.4;
    double temperature = 10000.0;
    // Cut the gradient through refined anchors between decoder layers.
    bool detach_anchors = true;

    std::size_t width() const { return hidden ? hidden : d_model / 16; }
    DenoisingConfig denoising() const { return {dn_groups, dn_center_noise, dn_width_noise}; }
    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;

    /// Query count and sequence length for the four reference setups:
    /// "roft", "roft-chatgpt", "coauthor", "tribert".
    static ModelConfig preset(const std::string& name);
};

/// One text as seen by the detector.
struct ModelInput {
    Tensor embeddings;              // [n, d_model], constant
    std::vector<double> positions;  // n normalized token midpoints in [0, 1]
};

struct DecoderLayerOutput {
    Tensor intervals;  // [q, 2] (c, w) after sigmoid
    Tensor logits;     // [q, 1] foreground logits
};

struct DecoderOutput {
    std::vector<DecoderLayerOutput> layers;  // last entry is the final prediction
    std::size_t num_learnable = 0;
    std::size_t num_denoising = 0;

    Tensor learnable_intervals(std::size_t layer) const;
    Tensor learnable_logits(std::size_t layer) const;
    Tensor denoising_intervals(std::size_t layer) const;
};

struct LayerPrediction {
    std::vector<Interval> intervals;
    std::vector<double> scores;
};

struct Prediction {
    std::vector<Interval> intervals;  // final layer, one per learnable query
    std::vector<double> scores;       // foreground probabilities
    std::vector<LayerPrediction> aux; // earlier decoder layers
};

class DetectionTransformer {
  public:
    DetectionTransformer(ModelConfig cfg, std::uint64_t seed);
    DetectionTransformer(ModelConfig cfg, ParameterStore params);

    const ModelConfig& config() const { return cfg_; }
    const ParameterStore& params() const { return params_; }
    ParameterStore& params() { return params_; }

    Tensor project(const Binding& p, const Tensor& embeddings) const;
    Tensor encode(const Binding& p, const Tensor& projected, const std::vector<double>& positions) const;
    DecoderOutput decode(const Binding& p, const Tensor& memory, const std::vector<double>& positions,
                         const DenoisingBatch* dn) const;

    DecoderOutput forward(const Binding& p, const ModelInput& input, const DenoisingBatch* dn = nullptr) const;

    /// Inference with frozen weights.
    Prediction predict(const ModelInput& input, const DenoisingBatch* dn = nullptr) const;

  private:
    struct Linear {
        std::size_t w = 0;
        std::size_t b = 0;
    };
    struct Norm {
        std::size_t g = 0;
        std::size_t b = 0;
    };
    struct EncoderLayer {
        Linear q, k, v, o;
        Norm n1;
        Linear f1, f2;
        Norm n2;
    };
    struct DecoderLayer {
        Linear sq, sk, sv, so;
        Norm n1;
        Linear cq_content, cq_pos, ck_content, ck_pos, cv, co;
        Norm n2;
        Linear f1, f2;
        Norm n3;
    };

    void build(std::uint64_t seed);
    Linear linear(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng);
    Norm norm(const std::string& name);
    static Tensor apply(const Binding& p, const Linear& l, const Tensor& x);
    static Tensor apply(const Binding& p, const Norm& n, const Tensor& x);
    Tensor ffn(const Binding& p, const Linear& f1, const Linear& f2, const Tensor& x) const;

    ModelConfig cfg_;
    ParameterStore params_;

    Linear input_proj_;
    std::vector<EncoderLayer> enc_;
    std::vector<DecoderLayer> dec_;
    Linear ref_head1_, ref_head2_;
    Linear box_head1_, box_head2_;
    Linear cls_head_;
    std::size_t query_content_ = 0;
    std::size_t anchors_ = 0;
    std::size_t dn_content_ = 0;
};

/// Multi-head scaled dot-product attention. The query and key inputs may be
/// split into parts that are concatenated per head before the dot product.
Tensor multi_head_attention(const std::vector<Tensor>& q_parts, const std::vector<Tensor>& k_parts, const Tensor& v,
                            std::size_t heads, const std::vector<std::uint8_t>& mask = {});

/// Sine/cosine features of one normalized position: [sin, cos, sin, ...].
/// Throws ShapeError for odd dim.
std::vector<double> sinusoidal_encode(double pos, std::size_t dim, double temperature = 10000.0);
/// Anchor encoding: c and w each take dim / 2 features, concatenated.
std::vector<double> sinusoidal_encode(const Interval& anchor, std::size_t dim, double temperature = 10000.0);

/// Normalized token positions as a constant [n, dim] sinusoidal table.
Tensor position_table(const std::vector<double>& positions, std::size_t dim, double temperature);

}  // namespace spandet
