#pragma once

// Evaluation and post-processing: mapping predicted character intervals to
// sentence boundaries and sentence labels, boundary and agreement metrics,
// text classification metrics, and the corpus-level evaluation report.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "spandet/datasets.hpp"
#include "spandet/geometry.hpp"

namespace spandet {

/// Sentence index i' at which authorship changes for a change point at
/// character t. With sentence i holding t and start/end its first and last
/// characters, i' = i + 1 when t >= (start + end) / 2, else i. A position
/// outside every sentence uses the nearest sentence (ties to the earlier).
std::size_t interval_to_sentence(std::size_t t, const std::vector<CharSpan>& sentences);

enum class SentenceLabel : std::uint8_t { llm = 0, human = 1, mixed = 2 };

const char* sentence_label_name(SentenceLabel l);

/// Fraction of each sentence's characters covered by the union of intervals.
std::vector<double> sentence_overlap(const std::vector<CharSpan>& sentences, const std::vector<CharSpan>& intervals);

/// o > threshold -> llm, o == 0 -> human, otherwise mixed.
std::vector<SentenceLabel> overlap_labels(const std::vector<CharSpan>& sentences, const std::vector<CharSpan>& intervals,
                                          double threshold = 0.94);

/// Sentence index an interval endpoint snaps to: the start uses x1, the
/// end uses its last character x2 - 1.
std::size_t snap_endpoint(std::size_t pos, const std::vector<CharSpan>& sentences);

/// Sorted unique sentence indices in [1, sentences - 1] produced by both
/// endpoints of every interval; snaps to the text start or end are dropped.
std::vector<std::size_t> snap_boundary_indices(const std::vector<CharSpan>& intervals, const std::vector<CharSpan>& sentences);

/// Same boundaries as character positions (sentence starts).
std::vector<std::size_t> snap_boundaries(const std::vector<CharSpan>& intervals, const std::vector<CharSpan>& sentences);

struct ScoredBoundary {
    std::size_t position = 0;
    double score = 0.0;
};

/// Boundary candidates of scored intervals: both endpoints of each interval,
/// snapped, scored by the interval's score, keeping the best score per position.
std::vector<ScoredBoundary> boundary_candidates(const std::vector<CharSpan>& intervals, const std::vector<double>& scores,
                                                const std::vector<CharSpan>& sentences);

/// 2 |top_K ∩ gt| / (|top_K| + |gt|). The top-K list always counts K
/// entries (missing predictions are misses) unless the text has fewer than
/// K possible boundaries, given by max_candidates. Throws for K == 0.
double f1_at_k(std::vector<ScoredBoundary> preds, const std::vector<std::size_t>& gts, std::size_t k,
               std::size_t max_candidates = std::numeric_limits<std::size_t>::max());

struct BoundaryScores {
    double acc = 0.0;
    double soft_acc1 = 0.0;
    double mse = 0.0;
};

BoundaryScores boundary_suite(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& gts);

/// Cohen's kappa between two labelings of the same items. When chance
/// agreement is 1 the result is 1 for identical labelings; otherwise throws.
double kappa(const std::vector<int>& a, const std::vector<int>& b);
double kappa(const std::vector<SentenceLabel>& a, const std::vector<SentenceLabel>& b);

double mae_word_boundary(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& gts);

/// Number of whitespace-separated words that start before character pos.
std::size_t word_index(std::string_view text, std::size_t pos);

struct ClassificationScores {
    double acc = 0.0;
    double human_rec = 0.0;
    double machine_rec = 0.0;
    double avg_rec = 0.0;
    double f1 = 0.0;
    double auroc = 0.0;
};

/// Pairwise AUROC with ties counted 0.5. labels: 1 machine, 0 human.
/// Throws std::invalid_argument when only one class is present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

ClassificationScores classification_suite(const std::vector<double>& scores, const std::vector<int>& labels,
                                          double threshold = 0.5);

/// kg of CO2 for the given power usage effectiveness, energy and grid intensity.
double co2_estimate(double pue, double kwh, double intensity_g_per_kwh);

// Predictions share the dataset line format: id, intervals, scores.
struct TextPrediction {
    std::string id;
    std::vector<CharSpan> intervals;
    std::vector<double> scores;
};

nlohmann::ordered_json to_json(const TextPrediction& p);
std::vector<TextPrediction> load_predictions(const std::filesystem::path& path);
void save_predictions(const std::filesystem::path& path, const std::vector<TextPrediction>& preds);

struct EvalConfig {
    std::size_t k = 3;
    double overlap_threshold = 0.94;
    double score_threshold = 0.5;  // intervals below this are ignored for labels and snapping
};

/// Corpus report over texts matched to predictions by id.
nlohmann::ordered_json evaluate(const std::vector<AnnotatedText>& gold, const std::vector<TextPrediction>& preds,
                                const EvalConfig& cfg);

}  // namespace spandet
