#include "spandet/datasets.hpp"

#include <array>
#include <fstream>
#include <set>

#include "spandet/utf8.hpp"

namespace spandet {

const char* label_name(Label l) {
    switch (l) {
        case Label::human: return "human";
        case Label::machine: return "machine";
        case Label::collaborative: return "collaborative";
    }
    return "unknown";
}

Label derive_label(const std::vector<CharSpan>& intervals, std::size_t text_length) {
    if (intervals.empty()) return Label::human;
    if (intervals.size() == 1 && intervals[0].x1 == 0 && intervals[0].x2 == text_length) return Label::machine;
    return Label::collaborative;
}

void validate(const AnnotatedText& t) {
    auto fail = [&](const std::string& msg) { throw DatasetError("record '" + t.id + "': " + msg); };
    if (t.id.empty()) throw DatasetError("record has an empty id");
    const std::size_t len = utf8::length(t.text);
    if (len == 0) fail("empty text");
    for (std::size_t i = 0; i < t.intervals.size(); ++i) {
        const CharSpan& s = t.intervals[i];
        if (s.x1 >= s.x2) fail("interval " + std::to_string(i) + " [" + std::to_string(s.x1) + ", " + std::to_string(s.x2) + ") needs x1 < x2");
        if (s.x2 > len) fail("interval " + std::to_string(i) + " ends at " + std::to_string(s.x2) + " beyond text length " + std::to_string(len));
        if (i > 0 && s.x1 < t.intervals[i - 1].x2) fail("intervals " + std::to_string(i - 1) + " and " + std::to_string(i) + " overlap or are unsorted");
    }
    const Label expected = derive_label(t.intervals, len);
    if (t.label != expected)
        fail(std::string("label ") + label_name(t.label) + " disagrees with intervals (expected " + label_name(expected) + ")");
    if (t.sentence_offsets)
        for (const auto& s : *t.sentence_offsets)
            if (s.x1 >= s.x2 || s.x2 > len) fail("sentence offset out of range");
}

namespace {

nlohmann::ordered_json spans_json(const std::vector<CharSpan>& spans) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : spans) arr.push_back({s.x1, s.x2});
    return arr;
}

std::vector<CharSpan> spans_from(const nlohmann::ordered_json& j, const char* field) {
    if (!j.is_array()) throw DatasetError(std::string(field) + " must be an array");
    std::vector<CharSpan> out;
    for (const auto& e : j) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer() || e[0].get<long long>() < 0 ||
            e[1].get<long long>() < 0)
            throw DatasetError(std::string(field) + " entries must be pairs of non-negative integers");
        out.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>()});
    }
    return out;
}

}  // namespace

nlohmann::ordered_json to_json(const AnnotatedText& t) {
    nlohmann::ordered_json j;
    j["id"] = t.id;
    j["text"] = t.text;
    j["intervals"] = spans_json(t.intervals);
    j["label"] = static_cast<int>(t.label);
    if (t.domain) j["domain"] = *t.domain;
    if (t.sentence_offsets) j["sentence_offsets"] = spans_json(*t.sentence_offsets);
    return j;
}

AnnotatedText from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object()) throw DatasetError("record must be a JSON object");
    for (const char* key : {"id", "text", "intervals", "label"})
        if (!j.contains(key)) throw DatasetError(std::string("missing field '") + key + "'");
    if (!j["id"].is_string() || !j["text"].is_string()) throw DatasetError("id and text must be strings");
    AnnotatedText t;
    t.id = j["id"].get<std::string>();
    t.text = j["text"].get<std::string>();
    t.intervals = spans_from(j["intervals"], "intervals");
    if (!j["label"].is_number_integer()) throw DatasetError("label must be 0, 1 or 2");
    const int label = j["label"].get<int>();
    if (label < 0 || label > 2) throw DatasetError("label must be 0, 1 or 2, got " + std::to_string(label));
    t.label = static_cast<Label>(label);
    if (j.contains("domain") && !j["domain"].is_null()) t.domain = j["domain"].get<std::string>();
    if (j.contains("sentence_offsets") && !j["sentence_offsets"].is_null())
        t.sentence_offsets = spans_from(j["sentence_offsets"], "sentence_offsets");
    validate(t);
    return t;
}

std::vector<AnnotatedText> load_records(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DatasetError("cannot open dataset file " + path.string());
    std::vector<AnnotatedText> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(from_json(nlohmann::ordered_json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
        } catch (const DatasetError& e) {
            throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!ids.insert(out.back().id).second)
            throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": duplicate id '" + out.back().id + "'");
    }
    return out;
}

void save_records(const std::filesystem::path& path, const std::vector<AnnotatedText>& records) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DatasetError("cannot write " + path.string());
    for (const auto& r : records) os << to_json(r).dump() << '\n';
}

DatasetSplit load_split(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw DatasetError("dataset directory not found: " + dir.string());
    DatasetSplit split;
    const std::array<std::pair<const char*, std::vector<AnnotatedText>*>, 3> parts{
        {{"train.jsonl", &split.train}, {"val.jsonl", &split.val}, {"test.jsonl", &split.test}}};
    std::set<std::string> ids;
    for (const auto& [name, dst] : parts) {
        const auto p = dir / name;
        if (!std::filesystem::exists(p)) continue;
        *dst = load_records(p);
        for (const auto& r : *dst)
            if (!ids.insert(r.id).second) throw DatasetError("id '" + r.id + "' appears in more than one split");
    }
    return split;
}

void save_split(const std::filesystem::path& dir, const DatasetSplit& split) {
    std::filesystem::create_directories(dir);
    save_records(dir / "train.jsonl", split.train);
    save_records(dir / "val.jsonl", split.val);
    save_records(dir / "test.jsonl", split.test);
}

namespace {

bool is_terminal(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }
bool is_closer(char32_t c) { return c == U'"' || c == U'\'' || c == U')' || c == U']' || c == 0x201D || c == 0x2019; }

bool is_abbreviation(std::u32string_view word) {
    static const std::set<std::u32string> known{U"Dr", U"Mr", U"Mrs", U"Ms", U"Prof", U"St", U"Jr", U"Sr", U"vs", U"etc", U"e.g", U"i.e"};
    return known.count(std::u32string(word)) > 0;
}

}  // namespace

std::vector<CharSpan> split_sentences(std::string_view text) {
    const std::u32string cps = utf8::decode(text);
    const std::size_t n = cps.size();
    std::vector<CharSpan> out;
    std::size_t i = 0;
    while (i < n && utf8::is_space(cps[i])) ++i;
    std::size_t start = i;
    while (i < n) {
        if (!is_terminal(cps[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && is_terminal(cps[j])) ++j;
        while (j < n && is_closer(cps[j])) ++j;
        if (j < n && !utf8::is_space(cps[j])) {
            i = j;
            continue;
        }
        if (j == i + 1 && cps[i] == U'.') {
            std::size_t k = i;
            while (k > start && !utf8::is_space(cps[k - 1])) --k;
            if (is_abbreviation(std::u32string_view(cps).substr(k, i - k)) && j < n) {
                i = j;
                continue;
            }
        }
        out.push_back({start, j});
        i = j;
        while (i < n && utf8::is_space(cps[i])) ++i;
        start = i;
    }
    if (start < n) {
        std::size_t end = n;
        while (end > start && utf8::is_space(cps[end - 1])) --end;
        out.push_back({start, end});
    }
    return out;
}

}  // namespace spandet
