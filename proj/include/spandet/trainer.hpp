#pragma once

// Training loop for the detector over precomputed token embeddings.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spandet/datasets.hpp"
#include "spandet/loss.hpp"
#include "spandet/metrics.hpp"
#include "spandet/model.hpp"
#include "spandet/optim.hpp"
#include "spandet/textproc.hpp"

namespace spandet {

/// Raised when a loss or gradient stops being finite.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    std::size_t epochs = 75;
    std::size_t batch_size = 32;
    std::size_t grad_accum = 1;
    double lr = 1e-4;
    double weight_decay = 1e-4;
    double warmup_fraction = 0.05;
    double clip_norm = 0.1;
    std::uint64_t seed = 0;
    bool parallel_batch = false;  // one thread per sample, reduced in sample order
    LossOptions loss;

    /// Batch size, learning rate and epochs of the reference setups:
    /// "roft", "roft-chatgpt", "coauthor", "tribert".
    static TrainConfig preset(const std::string& name);
    void validate() const;
};

nlohmann::ordered_json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// One text ready for the detector.
struct Sample {
    std::string id;
    std::size_t text_length = 0;
    ModelInput input;
    std::vector<Interval> gts;
    std::vector<CharSpan> spans;  // ground truth in characters
};

/// Tokenizes, embeds and normalizes one text. Sequences longer than
/// cfg.max_tokens keep their first max_tokens tokens.
Sample prepare_sample(const AnnotatedText& text, const EmbeddingProvider& provider, const ModelConfig& cfg);
std::vector<Sample> prepare_samples(const std::vector<AnnotatedText>& texts, const EmbeddingProvider& provider,
                                    const ModelConfig& cfg);

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    LossTerms train_terms;  // final decoder layer, mean over samples
    double grad_norm = 0.0;  // mean pre-clip norm
    double val_loss = 0.0;
    double val_iou = 0.0;    // mean best IoU per ground-truth interval
    double seconds = 0.0;
};

nlohmann::ordered_json to_json(const EpochLog& log);

struct TrainResult {
    std::vector<EpochLog> logs;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    ParameterStore best_params;  // independent copy
};

using EpochCallback = std::function<void(const EpochLog&, const DetectionTransformer&, bool is_best)>;

/// Deterministic for a fixed seed. Best epoch is chosen by validation loss
/// (training loss when val is empty). Throws NumericalError on a non-finite
/// loss and std::invalid_argument on an empty training set.
TrainResult train(DetectionTransformer& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct EvalLoss {
    double loss = 0.0;
    double iou = 0.0;
};

/// Learnable-query loss and best IoU without denoising queries.
EvalLoss evaluate_loss(const DetectionTransformer& model, const std::vector<Sample>& samples, const LossOptions& opts);

/// Predicted character intervals and scores for one prepared sample.
TextPrediction predict_sample(const DetectionTransformer& model, const Sample& sample);

}  // namespace spandet
