#include "spandet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "spandet/utf8.hpp"

namespace spandet {

std::size_t interval_to_sentence(std::size_t t, const std::vector<CharSpan>& sentences) {
    if (sentences.empty()) throw std::invalid_argument("interval_to_sentence: no sentences");
    std::size_t best = 0;
    std::size_t best_dist = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        const CharSpan& s = sentences[i];
        std::size_t dist = 0;
        if (t < s.x1)
            dist = s.x1 - t;
        else if (t >= s.x2)
            dist = t - (s.x2 - 1);
        if (dist < best_dist) {
            best = i;
            best_dist = dist;
        }
        if (dist == 0) break;
    }
    // t >= (start + end) / 2 with end = x2 - 1, kept in integers.
    const CharSpan& s = sentences[best];
    return 2 * t >= s.x1 + s.x2 - 1 ? best + 1 : best;
}

const char* sentence_label_name(SentenceLabel l) {
    switch (l) {
        case SentenceLabel::llm: return "llm";
        case SentenceLabel::human: return "human";
        case SentenceLabel::mixed: return "mixed";
    }
    return "unknown";
}

namespace {

std::vector<CharSpan> merged(std::vector<CharSpan> spans) {
    std::sort(spans.begin(), spans.end());
    std::vector<CharSpan> out;
    for (const auto& s : spans) {
        if (s.x2 <= s.x1) continue;
        if (!out.empty() && s.x1 <= out.back().x2)
            out.back().x2 = std::max(out.back().x2, s.x2);
        else
            out.push_back(s);
    }
    return out;
}

}  // namespace

std::vector<double> sentence_overlap(const std::vector<CharSpan>& sentences, const std::vector<CharSpan>& intervals) {
    const auto u = merged(intervals);
    std::vector<double> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) {
        std::size_t covered = 0;
        for (const auto& p : u) {
            const std::size_t lo = std::max(s.x1, p.x1), hi = std::min(s.x2, p.x2);
            if (hi > lo) covered += hi - lo;
        }
        out.push_back(s.length() ? static_cast<double>(covered) / static_cast<double>(s.length()) : 0.0);
    }
    return out;
}

std::vector<SentenceLabel> overlap_labels(const std::vector<CharSpan>& sentences, const std::vector<CharSpan>& intervals,
                                          double threshold) {
    std::vector<SentenceLabel> out;
    for (double o : sentence_overlap(sentences, intervals)) {
        if (o > threshold)
            out.push_back(SentenceLabel::llm);
        else if (o == 0.0)
            out.push_back(SentenceLabel::human);
        else
            out.push_back(SentenceLabel::mixed);
    }
    return out;
}

std::size_t snap_endpoint(std::size_t pos, const std::vector<CharSpan>& sentences) {
    return interval_to_sentence(pos, sentences);
}

std::vector<std::size_t> snap_boundary_indices(const std::vector<CharSpan>& intervals, const std::vector<CharSpan>& sentences) {
    std::vector<std::size_t> out;
    for (const auto& iv : intervals) {
        if (iv.x2 <= iv.x1) continue;
        for (std::size_t pos : {iv.x1, iv.x2 - 1}) {
            const std::size_t i = snap_endpoint(pos, sentences);
            if (i > 0 && i < sentences.size()) out.push_back(i);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::size_t> snap_boundaries(const std::vector<CharSpan>& intervals, const std::vector<CharSpan>& sentences) {
    std::vector<std::size_t> out;
    for (std::size_t i : snap_boundary_indices(intervals, sentences)) out.push_back(sentences[i].x1);
    return out;
}

std::vector<ScoredBoundary> boundary_candidates(const std::vector<CharSpan>& intervals, const std::vector<double>& scores,
                                                const std::vector<CharSpan>& sentences) {
    if (intervals.size() != scores.size()) throw std::invalid_argument("boundary_candidates: intervals and scores differ in length");
    std::map<std::size_t, double> best;
    for (std::size_t k = 0; k < intervals.size(); ++k) {
        for (std::size_t pos : snap_boundaries({intervals[k]}, sentences)) {
            auto [it, inserted] = best.emplace(pos, scores[k]);
            if (!inserted) it->second = std::max(it->second, scores[k]);
        }
    }
    std::vector<ScoredBoundary> out;
    for (const auto& [pos, score] : best) out.push_back({pos, score});
    return out;
}

double f1_at_k(std::vector<ScoredBoundary> preds, const std::vector<std::size_t>& gts, std::size_t k, std::size_t max_candidates) {
    if (k == 0) throw std::invalid_argument("f1_at_k: K must be positive");
    std::stable_sort(preds.begin(), preds.end(), [](const ScoredBoundary& a, const ScoredBoundary& b) {
        return a.score != b.score ? a.score > b.score : a.position < b.position;
    });
    std::vector<std::size_t> top;
    for (const auto& p : preds) {
        if (top.size() == k) break;
        if (std::find(top.begin(), top.end(), p.position) == top.end()) top.push_back(p.position);
    }
    std::size_t hits = 0;
    for (std::size_t g : gts) hits += std::find(top.begin(), top.end(), g) != top.end();
    const std::size_t denom = std::min(k, max_candidates) + gts.size();
    if (denom == 0) return 1.0;
    return 2.0 * static_cast<double>(hits) / static_cast<double>(denom);
}

BoundaryScores boundary_suite(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& gts) {
    if (preds.size() != gts.size())
        throw std::invalid_argument("boundary_suite: " + std::to_string(preds.size()) + " predictions for " + std::to_string(gts.size()) + " texts");
    if (preds.empty()) throw std::invalid_argument("boundary_suite: no texts");
    BoundaryScores s;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double d = static_cast<double>(preds[i]) - static_cast<double>(gts[i]);
        s.acc += d == 0.0;
        s.soft_acc1 += std::abs(d) <= 1.0;
        s.mse += d * d;
    }
    const double n = static_cast<double>(preds.size());
    s.acc /= n;
    s.soft_acc1 /= n;
    s.mse /= n;
    return s;
}

double kappa(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("kappa: labelings differ in length");
    if (a.empty()) throw std::invalid_argument("kappa: empty labelings");
    std::map<int, double> ca, cb;
    double agree = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ca[a[i]] += 1.0;
        cb[b[i]] += 1.0;
        agree += a[i] == b[i];
    }
    const double n = static_cast<double>(a.size());
    const double p0 = agree / n;
    double pe = 0.0;
    for (const auto& [label, count] : ca) {
        auto it = cb.find(label);
        if (it != cb.end()) pe += (count / n) * (it->second / n);
    }
    if (std::abs(1.0 - pe) < 1e-15) {
        if (p0 == 1.0) return 1.0;
        throw std::domain_error("kappa: degenerate marginals (chance agreement is 1)");
    }
    return (p0 - pe) / (1.0 - pe);
}

double kappa(const std::vector<SentenceLabel>& a, const std::vector<SentenceLabel>& b) {
    std::vector<int> ia(a.size()), ib(b.size());
    std::transform(a.begin(), a.end(), ia.begin(), [](SentenceLabel l) { return static_cast<int>(l); });
    std::transform(b.begin(), b.end(), ib.begin(), [](SentenceLabel l) { return static_cast<int>(l); });
    return kappa(ia, ib);
}

double mae_word_boundary(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& gts) {
    if (preds.size() != gts.size()) throw std::invalid_argument("mae_word_boundary: length mismatch");
    if (preds.empty()) throw std::invalid_argument("mae_word_boundary: no texts");
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) total += std::abs(static_cast<double>(preds[i]) - static_cast<double>(gts[i]));
    return total / static_cast<double>(preds.size());
}

std::size_t word_index(std::string_view text, std::size_t pos) {
    const auto cps = utf8::decode(text);
    std::size_t words = 0;
    for (std::size_t i = 0; i < cps.size() && i < pos; ++i)
        if (!utf8::is_space(cps[i]) && (i == 0 || utf8::is_space(cps[i - 1]))) ++words;
    return words;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("auroc: scores and labels differ in length");
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? pos : neg).push_back(scores[i]);
    if (pos.empty() || neg.empty()) throw std::invalid_argument("auroc: undefined with a single class");
    // Rank form of the pairwise count: sort negatives, then for each positive
    // count negatives strictly below and tied.
    std::sort(neg.begin(), neg.end());
    double wins = 0.0;
    for (double p : pos) {
        const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
        const auto hi = std::upper_bound(neg.begin(), neg.end(), p);
        wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
    }
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

ClassificationScores classification_suite(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
    ClassificationScores s;
    s.auroc = auroc(scores, labels);
    double tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool machine = scores[i] >= threshold;
        if (labels[i])
            (machine ? tp : fn) += 1;
        else
            (machine ? fp : tn) += 1;
    }
    s.acc = (tp + tn) / static_cast<double>(scores.size());
    s.machine_rec = tp / (tp + fn);
    s.human_rec = tn / (tn + fp);
    s.avg_rec = 0.5 * (s.machine_rec + s.human_rec);
    s.f1 = 2 * tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    return s;
}

double co2_estimate(double pue, double kwh, double intensity_g_per_kwh) {
    if (pue < 0 || kwh < 0 || intensity_g_per_kwh < 0) throw std::invalid_argument("co2_estimate: arguments must be non-negative");
    return pue * kwh * intensity_g_per_kwh / 1000.0;
}

nlohmann::ordered_json to_json(const TextPrediction& p) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    auto ivs = nlohmann::ordered_json::array();
    for (const auto& s : p.intervals) ivs.push_back({s.x1, s.x2});
    j["intervals"] = ivs;
    j["scores"] = p.scores;
    return j;
}

std::vector<TextPrediction> load_predictions(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DatasetError("cannot open predictions file " + path.string());
    std::vector<TextPrediction> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            TextPrediction p;
            p.id = j.at("id").get<std::string>();
            for (const auto& e : j.at("intervals")) p.intervals.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
            p.scores = j.at("scores").get<std::vector<double>>();
            if (p.scores.size() != p.intervals.size()) throw DatasetError("scores and intervals differ in length");
            out.push_back(std::move(p));
        } catch (const std::exception& e) {
            throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void save_predictions(const std::filesystem::path& path, const std::vector<TextPrediction>& preds) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DatasetError("cannot write " + path.string());
    for (const auto& p : preds) os << to_json(p).dump() << '\n';
}

nlohmann::ordered_json evaluate(const std::vector<AnnotatedText>& gold, const std::vector<TextPrediction>& preds,
                                const EvalConfig& cfg) {
    std::unordered_map<std::string, const TextPrediction*> by_id;
    for (const auto& p : preds) by_id[p.id] = &p;

    std::vector<std::size_t> gt_boundary, pred_boundary, gt_word, pred_word;
    std::vector<int> gt_labels, pred_labels;
    std::map<std::size_t, std::pair<double, std::size_t>> f1_groups;  // gt boundary count -> (sum, texts)
    std::size_t missing = 0;

    for (const auto& t : gold) {
        auto it = by_id.find(t.id);
        if (it == by_id.end()) {
            ++missing;
            continue;
        }
        const TextPrediction& p = *it->second;
        const auto sentences = t.sentence_offsets ? *t.sentence_offsets : split_sentences(t.text);
        const std::size_t n = sentences.size();

        std::vector<CharSpan> kept;
        for (std::size_t k = 0; k < p.intervals.size(); ++k)
            if (p.scores[k] >= cfg.score_threshold) kept.push_back(p.intervals[k]);

        // Single change point: start of the first GT interval, and the start
        // of the best-scoring predicted interval when it clears the threshold.
        const std::size_t words = word_index(t.text, std::numeric_limits<std::size_t>::max());
        if (t.intervals.empty()) {
            gt_boundary.push_back(n);
            gt_word.push_back(words);
        } else {
            gt_boundary.push_back(interval_to_sentence(t.intervals.front().x1, sentences));
            gt_word.push_back(word_index(t.text, t.intervals.front().x1));
        }
        const auto best = std::max_element(p.scores.begin(), p.scores.end());
        if (best == p.scores.end() || *best < cfg.score_threshold) {
            pred_boundary.push_back(n);
            pred_word.push_back(words);
        } else {
            const CharSpan& iv = p.intervals[static_cast<std::size_t>(best - p.scores.begin())];
            pred_boundary.push_back(interval_to_sentence(iv.x1, sentences));
            pred_word.push_back(word_index(t.text, iv.x1));
        }

        const auto gt_b = snap_boundaries(t.intervals, sentences);
        const double f1 = f1_at_k(boundary_candidates(p.intervals, p.scores, sentences), gt_b, cfg.k, n > 0 ? n - 1 : 0);
        auto& g = f1_groups[gt_b.size()];
        g.first += f1;
        g.second += 1;

        for (auto l : overlap_labels(sentences, t.intervals, cfg.overlap_threshold)) gt_labels.push_back(static_cast<int>(l));
        for (auto l : overlap_labels(sentences, kept, cfg.overlap_threshold)) pred_labels.push_back(static_cast<int>(l));
    }

    nlohmann::ordered_json report;
    report["texts"] = gold.size() - missing;
    report["missing_predictions"] = missing;
    if (gt_boundary.empty()) return report;

    const auto bs = boundary_suite(pred_boundary, gt_boundary);
    report["boundary"] = {{"acc", bs.acc}, {"soft_acc1", bs.soft_acc1}, {"mse", bs.mse}};
    report["mae_word_boundary"] = mae_word_boundary(pred_word, gt_word);

    auto groups = nlohmann::ordered_json::object();
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& [m, sc] : f1_groups) {
        groups[std::to_string(m)] = {{"texts", sc.second}, {"f1", sc.first / static_cast<double>(sc.second)}};
        total += sc.first;
        count += sc.second;
    }
    report["f1_at_k"] = {{"k", cfg.k}, {"mean", total / static_cast<double>(count)}, {"by_gt_boundaries", groups}};

    nlohmann::ordered_json kj;
    try {
        kj = kappa(pred_labels, gt_labels);
    } catch (const std::domain_error&) {
        kj = nullptr;
    }
    report["sentence_kappa"] = kj;
    report["config"] = {{"k", cfg.k}, {"overlap_threshold", cfg.overlap_threshold}, {"score_threshold", cfg.score_threshold}};
    return report;
}

}  // namespace spandet
