#pragma once

// Converters from third-party mixed-authorship layouts to AnnotatedText.
//
// Input is JSON lines. Accepted record shapes:
//   roft      {"id"?, "sentences": [str...], "boundary": int}
//             or {"id"?, "prompt_body": str, "gen_body": str,
//                 "true_boundary_index": int} with sentences separated by
//             "_SEP_"; sentences are joined with single spaces
//   coauthor  {"id"?, "segments": [{"text": str, "author": str}...]}
//             authors "api", "machine", "model" or "gpt3" mark generated
//             text; segments are concatenated verbatim
//   tribert   {"id"?, "sentences": [str...], "labels": [0|1 ...]}
//             label 1 (or "machine") marks a generated sentence; sentences
//             are joined with single spaces

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spandet/datasets.hpp"

namespace spandet {

/// boundary is the index of the first generated sentence; boundary ==
/// sentences.size() means fully human. Throws DatasetError when out of range.
AnnotatedText roft_to_intervals(const std::vector<std::string>& sentences, int boundary, std::string id);

struct AuthoredSegment {
    std::string text;
    bool machine = false;
};
AnnotatedText coauthor_to_intervals(const std::vector<AuthoredSegment>& segments, std::string id);

/// Consecutive generated sentences merge into one interval.
AnnotatedText tribert_to_intervals(const std::vector<std::string>& sentences, const std::vector<int>& machine,
                                   std::string id);

enum class SourceFormat { roft, coauthor, tribert };

SourceFormat source_format_from_name(const std::string& name);

struct ConversionStats {
    std::size_t records = 0;
    std::size_t converted = 0;
    std::size_t skipped = 0;
    std::map<std::size_t, std::size_t> interval_histogram;  // interval count -> texts
    std::vector<std::string> warnings;
};

/// Converts every line of a JSON-lines file. With strict set the first bad
/// record throws DatasetError; otherwise it is skipped and a warning kept.
std::vector<AnnotatedText> convert_file(SourceFormat fmt, const std::filesystem::path& in, bool strict,
                                        ConversionStats& stats);

}  // namespace spandet
