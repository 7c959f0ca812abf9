#pragma once

// Annotated texts and the line-record dataset format: one JSON object per
// line with id, text, intervals ([[x1, x2], ...] in code points), label and
// the optional domain and sentence_offsets fields.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spandet/geometry.hpp"

namespace spandet {

enum class Label : int { human = 0, machine = 1, collaborative = 2 };

const char* label_name(Label l);

struct AnnotatedText {
    std::string id;
    std::string text;
    std::vector<CharSpan> intervals;
    Label label = Label::human;
    std::optional<std::string> domain;
    std::optional<std::vector<CharSpan>> sentence_offsets;

    friend bool operator==(const AnnotatedText&, const AnnotatedText&) = default;
};

class DatasetError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Label implied by the intervals of a text of the given length.
Label derive_label(const std::vector<CharSpan>& intervals, std::size_t text_length);

/// Throws DatasetError on unsorted, overlapping or out-of-range intervals
/// and on a label that disagrees with the intervals.
void validate(const AnnotatedText& t);

nlohmann::ordered_json to_json(const AnnotatedText& t);
/// Parses and validates one record.
AnnotatedText from_json(const nlohmann::ordered_json& j);

std::vector<AnnotatedText> load_records(const std::filesystem::path& path);
void save_records(const std::filesystem::path& path, const std::vector<AnnotatedText>& records);

struct DatasetSplit {
    std::vector<AnnotatedText> train;
    std::vector<AnnotatedText> val;
    std::vector<AnnotatedText> test;
};

/// Reads train.jsonl, val.jsonl and test.jsonl from dir (missing splits are
/// empty) and rejects ids shared between splits.
DatasetSplit load_split(const std::filesystem::path& dir);
void save_split(const std::filesystem::path& dir, const DatasetSplit& split);

/// Naive sentence segmentation: a sentence ends after a run of . ! or ?
/// followed by whitespace or the end of text. A period after a common title
/// abbreviation (Dr, Mr, etc) does not end a sentence.
/// Returned spans are trimmed of surrounding whitespace.
std::vector<CharSpan> split_sentences(std::string_view text);

}  // namespace spandet
