#include "spandet/converters.hpp"

#include <cstdio>
#include <fstream>

#include "spandet/utf8.hpp"

namespace spandet {

namespace {

struct Joined {
    std::string text;
    std::vector<CharSpan> offsets;
};

Joined join_sentences(const std::vector<std::string>& sentences) {
    Joined j;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (i > 0) {
            j.text += ' ';
            ++pos;
        }
        const std::size_t len = utf8::length(sentences[i]);
        if (len == 0) throw DatasetError("sentence " + std::to_string(i) + " is empty");
        j.text += sentences[i];
        j.offsets.push_back({pos, pos + len});
        pos += len;
    }
    return j;
}

AnnotatedText finish(std::string id, std::string text, std::vector<CharSpan> intervals,
                     std::optional<std::vector<CharSpan>> sentences) {
    AnnotatedText t;
    t.id = std::move(id);
    t.text = std::move(text);
    t.intervals = std::move(intervals);
    t.label = derive_label(t.intervals, utf8::length(t.text));
    t.sentence_offsets = std::move(sentences);
    validate(t);
    return t;
}

}  // namespace

AnnotatedText roft_to_intervals(const std::vector<std::string>& sentences, int boundary, std::string id) {
    if (sentences.empty()) throw DatasetError("roft record has no sentences");
    if (boundary < 0 || static_cast<std::size_t>(boundary) > sentences.size())
        throw DatasetError("roft boundary " + std::to_string(boundary) + " outside [0, " + std::to_string(sentences.size()) + "]");
    Joined j = join_sentences(sentences);
    std::vector<CharSpan> intervals;
    const auto b = static_cast<std::size_t>(boundary);
    if (b < sentences.size()) intervals.push_back({j.offsets[b].x1, j.offsets.back().x2});
    return finish(std::move(id), std::move(j.text), std::move(intervals), std::move(j.offsets));
}

AnnotatedText coauthor_to_intervals(const std::vector<AuthoredSegment>& segments, std::string id) {
    std::string text;
    std::vector<CharSpan> intervals;
    std::size_t pos = 0;
    for (const auto& seg : segments) {
        const std::size_t len = utf8::length(seg.text);
        if (len == 0) continue;
        if (seg.machine) {
            if (!intervals.empty() && intervals.back().x2 == pos)
                intervals.back().x2 = pos + len;
            else
                intervals.push_back({pos, pos + len});
        }
        text += seg.text;
        pos += len;
    }
    if (pos == 0) throw DatasetError("coauthor record has no text");
    auto sentences = split_sentences(text);
    return finish(std::move(id), std::move(text), std::move(intervals), std::move(sentences));
}

AnnotatedText tribert_to_intervals(const std::vector<std::string>& sentences, const std::vector<int>& machine,
                                   std::string id) {
    if (sentences.empty()) throw DatasetError("tribert record has no sentences");
    if (sentences.size() != machine.size())
        throw DatasetError("tribert record has " + std::to_string(sentences.size()) + " sentences but " +
                           std::to_string(machine.size()) + " labels");
    Joined j = join_sentences(sentences);
    std::vector<CharSpan> intervals;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (!machine[i]) continue;
        if (i > 0 && machine[i - 1])
            intervals.back().x2 = j.offsets[i].x2;
        else
            intervals.push_back(j.offsets[i]);
    }
    return finish(std::move(id), std::move(j.text), std::move(intervals), std::move(j.offsets));
}

SourceFormat source_format_from_name(const std::string& name) {
    if (name == "roft") return SourceFormat::roft;
    if (name == "coauthor") return SourceFormat::coauthor;
    if (name == "tribert") return SourceFormat::tribert;
    throw std::invalid_argument("unknown source format '" + name + "' (expected roft, coauthor or tribert)");
}

namespace {

using json = nlohmann::json;

std::vector<std::string> split_sep(const std::string& s) {
    std::vector<std::string> out;
    std::size_t begin = 0;
    while (true) {
        const std::size_t at = s.find("_SEP_", begin);
        std::string part = s.substr(begin, at == std::string::npos ? std::string::npos : at - begin);
        const auto a = part.find_first_not_of(" \t\n");
        if (a != std::string::npos) out.push_back(part.substr(a, part.find_last_not_of(" \t\n") - a + 1));
        if (at == std::string::npos) break;
        begin = at + 5;
    }
    return out;
}

std::vector<std::string> string_list(const json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_array()) throw DatasetError(std::string("missing array field '") + field + "'");
    std::vector<std::string> out;
    for (const auto& e : j[field]) {
        if (!e.is_string()) throw DatasetError(std::string(field) + " entries must be strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

int machine_flag(const json& e) {
    if (e.is_number_integer()) {
        const int v = e.get<int>();
        if (v != 0 && v != 1) throw DatasetError("sentence label must be 0 or 1");
        return v;
    }
    if (e.is_boolean()) return e.get<bool>() ? 1 : 0;
    if (e.is_string()) {
        const auto s = e.get<std::string>();
        if (s == "machine" || s == "1") return 1;
        if (s == "human" || s == "0") return 0;
    }
    throw DatasetError("unrecognized sentence label " + e.dump());
}

AnnotatedText convert_record(SourceFormat fmt, const json& j, const std::string& fallback_id) {
    if (!j.is_object()) throw DatasetError("record must be a JSON object");
    std::string id = fallback_id;
    if (j.contains("id")) id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    switch (fmt) {
        case SourceFormat::roft: {
            std::vector<std::string> sentences;
            int boundary = 0;
            if (j.contains("sentences")) {
                sentences = string_list(j, "sentences");
                if (!j.contains("boundary") || !j["boundary"].is_number_integer()) throw DatasetError("missing integer field 'boundary'");
                boundary = j["boundary"].get<int>();
            } else {
                if (!j.contains("prompt_body") || !j.contains("true_boundary_index"))
                    throw DatasetError("expected 'sentences'/'boundary' or 'prompt_body'/'gen_body'/'true_boundary_index'");
                sentences = split_sep(j["prompt_body"].get<std::string>());
                if (j.contains("gen_body"))
                    for (auto& s : split_sep(j["gen_body"].get<std::string>())) sentences.push_back(std::move(s));
                boundary = j["true_boundary_index"].get<int>();
            }
            return roft_to_intervals(sentences, boundary, std::move(id));
        }
        case SourceFormat::coauthor: {
            if (!j.contains("segments") || !j["segments"].is_array()) throw DatasetError("missing array field 'segments'");
            std::vector<AuthoredSegment> segs;
            for (const auto& s : j["segments"]) {
                if (!s.is_object() || !s.contains("text") || !s.contains("author")) throw DatasetError("segment needs text and author");
                const auto author = s["author"].get<std::string>();
                const bool machine = author == "api" || author == "machine" || author == "model" || author == "gpt3";
                if (!machine && author != "user" && author != "human") throw DatasetError("unknown author '" + author + "'");
                segs.push_back({s["text"].get<std::string>(), machine});
            }
            return coauthor_to_intervals(segs, std::move(id));
        }
        case SourceFormat::tribert: {
            auto sentences = string_list(j, "sentences");
            if (!j.contains("labels") || !j["labels"].is_array()) throw DatasetError("missing array field 'labels'");
            std::vector<int> machine;
            for (const auto& e : j["labels"]) machine.push_back(machine_flag(e));
            return tribert_to_intervals(sentences, machine, std::move(id));
        }
    }
    throw DatasetError("unsupported format");
}

}  // namespace

std::vector<AnnotatedText> convert_file(SourceFormat fmt, const std::filesystem::path& in, bool strict,
                                        ConversionStats& stats) {
    std::ifstream is(in);
    if (!is) throw DatasetError("cannot open " + in.string());
    std::vector<AnnotatedText> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++stats.records;
        char fallback[32];
        std::snprintf(fallback, sizeof fallback, "line-%06zu", lineno);
        try {
            AnnotatedText t = convert_record(fmt, json::parse(line), fallback);
            ++stats.interval_histogram[t.intervals.size()];
            out.push_back(std::move(t));
            ++stats.converted;
        } catch (const std::exception& e) {
            const std::string msg = in.string() + ":" + std::to_string(lineno) + ": " + e.what();
            if (strict) throw DatasetError(msg);
            stats.warnings.push_back(msg);
            ++stats.skipped;
        }
    }
    return out;
}

}  // namespace spandet
