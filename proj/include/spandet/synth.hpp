#pragma once

// Synthetic mixed-authorship corpora. Texts are sentences of pseudo-words
// drawn from one shared vocabulary, so the surface text carries no hint of
// authorship; the only signal lives in the embeddings produced by
// SignalProvider, which shifts every token inside a ground-truth interval
// along a fixed direction by sigma.

#include <cstdint>
#include <string>

#include "spandet/datasets.hpp"
#include "spandet/textproc.hpp"

namespace spandet {

enum class SynthMode {
    roft,   // one boundary per text, sentence index uniform in [1, sentences - 1]
    mixed,  // balanced human / machine / collaborative labels
};

struct SynthSpec {
    std::size_t n_texts = 2000;
    SynthMode mode = SynthMode::roft;
    std::size_t sentences = 10;
    std::size_t min_words = 3;
    std::size_t max_words = 6;
    std::size_t max_intervals = 3;  // collaborative texts in mixed mode
    double signal = 5.0;
    double val_fraction = 0.1;
    double test_fraction = 0.1;
    std::size_t vocabulary = 600;

    /// Throws std::invalid_argument on a negative signal or an impossible shape.
    void validate() const;
    nlohmann::ordered_json to_json() const;
};

SynthMode synth_mode_from_name(const std::string& name);
const char* synth_mode_name(SynthMode m);

DatasetSplit synth_generate(const SynthSpec& spec, std::uint64_t seed);

/// Toy embeddings plus sigma * u on tokens whose character midpoint lies in
/// an annotated interval; u is a unit vector fixed by the seed.
class SignalProvider : public EmbeddingProvider {
  public:
    SignalProvider(std::size_t dim, std::uint64_t seed, double sigma, bool append_cls = false);
    EmbeddingSequence embed(const EmbedRequest& req) const override;
    std::size_t dim() const override { return embedder_.dim(); }
    std::string name() const override { return "signal"; }
    const std::vector<double>& direction() const { return direction_; }

  private:
    ToyEmbedder embedder_;
    std::vector<double> direction_;
    double sigma_;
    bool cls_;
};

}  // namespace spandet
