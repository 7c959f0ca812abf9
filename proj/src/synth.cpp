#include "spandet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "spandet/converters.hpp"

namespace spandet {

void SynthSpec::validate() const {
    if (!(signal >= 0.0)) throw std::invalid_argument("signal strength must be >= 0");
    if (n_texts == 0) throw std::invalid_argument("n_texts must be positive");
    if (sentences < 2) throw std::invalid_argument("need at least 2 sentences per text");
    if (min_words == 0 || min_words > max_words) throw std::invalid_argument("need 1 <= min_words <= max_words");
    if (max_intervals == 0 || (mode == SynthMode::mixed && 2 * max_intervals - 1 > sentences))
        throw std::invalid_argument("max_intervals does not fit in the sentence count");
    if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction >= 1.0)
        throw std::invalid_argument("val and test fractions must be non-negative and sum below 1");
    if (vocabulary < 10) throw std::invalid_argument("vocabulary must hold at least 10 words");
}

nlohmann::ordered_json SynthSpec::to_json() const {
    return {{"n_texts", n_texts},       {"mode", synth_mode_name(mode)},
            {"sentences", sentences},   {"min_words", min_words},
            {"max_words", max_words},   {"max_intervals", max_intervals},
            {"signal", signal},         {"val_fraction", val_fraction},
            {"test_fraction", test_fraction}, {"vocabulary", vocabulary}};
}

SynthMode synth_mode_from_name(const std::string& name) {
    if (name == "roft") return SynthMode::roft;
    if (name == "mixed") return SynthMode::mixed;
    throw std::invalid_argument("unknown synthetic mode '" + name + "' (expected roft or mixed)");
}

const char* synth_mode_name(SynthMode m) { return m == SynthMode::roft ? "roft" : "mixed"; }

namespace {

std::vector<std::string> make_vocabulary(std::size_t size, std::mt19937_64& rng) {
    static const char* onsets[] = {"b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z", "br", "st", "tr"};
    static const char* vowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
    std::uniform_int_distribution<std::size_t> syllables(1, 3), on(0, std::size(onsets) - 1), vo(0, std::size(vowels) - 1);
    std::set<std::string> seen{"etc"};
    std::vector<std::string> vocab;
    while (vocab.size() < size) {
        std::string w;
        const std::size_t k = syllables(rng);
        for (std::size_t s = 0; s < k; ++s) w += std::string(onsets[on(rng)]) + vowels[vo(rng)];
        if (w.size() < 3 || !seen.insert(w).second) continue;
        vocab.push_back(std::move(w));
    }
    return vocab;
}

// Machine-sentence flags for a text; runs of 1s become intervals.
std::vector<int> sentence_flags(const SynthSpec& spec, std::size_t index, std::mt19937_64& rng) {
    const std::size_t n = spec.sentences;
    std::vector<int> flags(n, 0);
    if (spec.mode == SynthMode::roft) {
        const std::size_t b = std::uniform_int_distribution<std::size_t>(1, n - 1)(rng);
        std::fill(flags.begin() + static_cast<std::ptrdiff_t>(b), flags.end(), 1);
        return flags;
    }
    switch (index % 3) {
        case 0: return flags;
        case 1: std::fill(flags.begin(), flags.end(), 1); return flags;
        default: break;
    }
    // Collaborative: k machine runs separated by at least one human sentence,
    // never covering the whole text.
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, spec.max_intervals)(rng);
    while (true) {
        std::fill(flags.begin(), flags.end(), 0);
        std::vector<std::size_t> starts(n);
        for (std::size_t i = 0; i < n; ++i) starts[i] = i;
        std::shuffle(starts.begin(), starts.end(), rng);
        std::size_t placed = 0;
        for (std::size_t s : starts) {
            if (placed == k) break;
            const std::size_t len = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
            const std::size_t end = std::min(n, s + len);
            bool clear = true;
            for (std::size_t i = (s == 0 ? 0 : s - 1); i < std::min(n, end + 1); ++i) clear = clear && !flags[i];
            if (!clear) continue;
            for (std::size_t i = s; i < end; ++i) flags[i] = 1;
            ++placed;
        }
        const bool all = std::all_of(flags.begin(), flags.end(), [](int f) { return f == 1; });
        if (placed == k && !all) return flags;
    }
}

}  // namespace

DatasetSplit synth_generate(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    const auto vocab = make_vocabulary(spec.vocabulary, rng);
    std::uniform_int_distribution<std::size_t> word(0, vocab.size() - 1), words(spec.min_words, spec.max_words);

    std::vector<AnnotatedText> all;
    all.reserve(spec.n_texts);
    for (std::size_t t = 0; t < spec.n_texts; ++t) {
        std::vector<std::string> sentences;
        for (std::size_t s = 0; s < spec.sentences; ++s) {
            std::string sent;
            const std::size_t k = words(rng);
            for (std::size_t w = 0; w < k; ++w) {
                std::string tok = vocab[word(rng)];
                if (w == 0) tok[0] = static_cast<char>(tok[0] - 'a' + 'A');
                if (w > 0) sent += ' ';
                sent += tok;
            }
            sent += '.';
            sentences.push_back(std::move(sent));
        }
        const auto flags = sentence_flags(spec, t, rng);
        char id[32];
        std::snprintf(id, sizeof id, "synth-%06zu", t);
        AnnotatedText rec;
        if (spec.mode == SynthMode::roft) {
            const auto b = static_cast<int>(std::find(flags.begin(), flags.end(), 1) - flags.begin());
            rec = roft_to_intervals(sentences, b, id);
        } else {
            rec = tribert_to_intervals(sentences, flags, id);
        }
        rec.domain = "synthetic";
        all.push_back(std::move(rec));
    }

    const auto n = all.size();
    const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(spec.val_fraction * static_cast<double>(n)));
    DatasetSplit split;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n - n_val - n_test)
            split.train.push_back(std::move(all[i]));
        else if (i < n - n_test)
            split.val.push_back(std::move(all[i]));
        else
            split.test.push_back(std::move(all[i]));
    }
    return split;
}

SignalProvider::SignalProvider(std::size_t dim, std::uint64_t seed, double sigma, bool append_cls)
    : embedder_(dim, seed), direction_(dim), sigma_(sigma), cls_(append_cls) {
    if (sigma < 0) throw std::invalid_argument("signal strength must be >= 0");
    std::mt19937_64 rng(seed ^ 0x5DEECE66Dull);
    std::normal_distribution<double> normal;
    double norm = 0;
    for (double& x : direction_) {
        x = normal(rng);
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : direction_) x /= norm;
}

EmbeddingSequence SignalProvider::embed(const EmbedRequest& req) const {
    EmbeddingSequence emb = embedder_.embed(req.tokens, false);
    for (std::size_t i = 0; i < emb.n; ++i) {
        const std::size_t mid2 = emb.offsets[i].x1 + emb.offsets[i].x2;
        const bool inside = std::any_of(req.annotated.begin(), req.annotated.end(),
                                        [&](const CharSpan& s) { return mid2 >= 2 * s.x1 && mid2 < 2 * s.x2; });
        if (!inside) continue;
        auto row = emb.row(i);
        for (std::size_t k = 0; k < emb.d; ++k) row[k] += sigma_ * direction_[k];
    }
    if (cls_) append_mean_cls(emb);
    return emb;
}

}  // namespace spandet
