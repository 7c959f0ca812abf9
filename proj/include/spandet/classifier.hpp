#pragma once

// Text-level authorship classifier: two linear layers over the final hidden
// state of a [CLS] row appended at the end of the embedding sequence.

#include <cstdint>
#include <vector>

#include "spandet/params.hpp"
#include "spandet/tensor.hpp"

namespace spandet {

struct ClassifierConfig {
    std::size_t d_model = 4096;
    std::size_t hidden = 256;
    std::size_t classes = 2;  // 2: human/machine, 3: adds collaborative
};

class ClassifierHead {
  public:
    ClassifierHead(ClassifierConfig cfg, std::uint64_t seed);

    const ClassifierConfig& config() const { return cfg_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }

    /// Class logits [1, classes] for a sequence whose last row is the CLS state.
    Tensor logits(const Binding& p, const Tensor& embeddings) const;
    /// Softmax probabilities with frozen weights.
    std::vector<double> classify(const Tensor& embeddings) const;

  private:
    ClassifierConfig cfg_;
    ParameterStore params_;
    std::size_t w1_, b1_, w2_, b2_;
};

struct ClassifierSample {
    Tensor embeddings;  // last row is the CLS state
    std::size_t label = 0;
};

struct ClassifierTrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 16;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;
};

/// Cross-entropy training with AdamW; returns the mean loss per epoch.
std::vector<double> train_classifier(ClassifierHead& head, const std::vector<ClassifierSample>& data,
                                     const ClassifierTrainConfig& cfg);

}  // namespace spandet
