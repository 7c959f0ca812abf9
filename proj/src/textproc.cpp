#include "spandet/textproc.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "spandet/utf8.hpp"

namespace spandet {

TokenizedText tokenize(std::string_view text) {
    const std::u32string cps = utf8::decode(text);
    TokenizedText tk;
    tk.text_length = cps.size();
    std::size_t i = 0;
    while (i < cps.size()) {
        if (utf8::is_space(cps[i])) {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        if (!utf8::is_punct(cps[i]))
            while (j < cps.size() && !utf8::is_space(cps[j]) && !utf8::is_punct(cps[j])) ++j;
        tk.tokens.push_back(utf8::encode(std::u32string_view(cps).substr(i, j - i)));
        tk.offsets.push_back({i, j});
        i = j;
    }
    if (tk.tokens.empty()) throw std::invalid_argument("tokenize: text is empty or whitespace-only");
    return tk;
}

std::pair<CharSpan, std::size_t> snap_to_tokens(const CharSpan& span, const TokenizedText& tk) {
    auto mid2 = [](const CharSpan& s) { return s.x1 + s.x2; };  // twice the midpoint, stays integral
    std::size_t first = tk.size(), last = 0;
    for (std::size_t t = 0; t < tk.size(); ++t) {
        const std::size_t m = mid2(tk.offsets[t]);
        if (m >= 2 * span.x1 && m < 2 * span.x2) {
            first = std::min(first, t);
            last = t;
        }
    }
    if (first == tk.size()) {
        // No token centered inside: take the one whose center is closest.
        const std::size_t target = mid2(span);
        std::size_t best = 0;
        for (std::size_t t = 1; t < tk.size(); ++t) {
            auto dist = [&](std::size_t k) {
                const std::size_t m = mid2(tk.offsets[k]);
                return m > target ? m - target : target - m;
            };
            if (dist(t) < dist(best)) best = t;
        }
        first = last = best;
    }
    const CharSpan snapped{tk.offsets[first].x1, tk.offsets[last].x2};
    auto diff = [](std::size_t a, std::size_t b) { return a > b ? a - b : b - a; };
    return {snapped, diff(snapped.x1, span.x1) + diff(snapped.x2, span.x2)};
}

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::toy: return "toy";
        case Provenance::pretrained: return "pretrained";
        case Provenance::finetuned: return "finetuned";
    }
    return "unknown";
}

Provenance provenance_from_name(std::string_view name) {
    if (name == "toy") return Provenance::toy;
    if (name == "pretrained") return Provenance::pretrained;
    if (name == "finetuned") return Provenance::finetuned;
    throw std::invalid_argument("unknown embedding provenance '" + std::string(name) + "'");
}

Tensor EmbeddingSequence::token_tensor() const {
    const std::size_t rows = token_rows();
    return Tensor::from({rows, d}, std::vector<double>(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rows * d)));
}

Tensor EmbeddingSequence::full_tensor() const { return Tensor::from({n, d}, values); }

std::vector<double> EmbeddingSequence::positions(std::size_t text_length) const {
    std::vector<double> pos(token_rows());
    const double len = static_cast<double>(std::max<std::size_t>(text_length, 1));
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<double>(offsets[i].x1 + offsets[i].x2) / (2.0 * len);
    return pos;
}

namespace {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 14695981039346656037ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

ToyEmbedder::ToyEmbedder(std::size_t dim, std::uint64_t seed, std::size_t table_rows)
    : dim_(dim), seed_(seed), rows_(table_rows), table_(dim * table_rows) {
    if (dim < 8) throw std::invalid_argument("toy embedder needs dim >= 8, got " + std::to_string(dim));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& x : table_) x = normal(rng);
}

std::vector<double> ToyEmbedder::token_vector(std::string_view token) const {
    const std::u32string padded = U"#" + utf8::decode(token) + U"#";
    std::vector<double> v(dim_, 0.0);
    const std::size_t grams = padded.size() >= 3 ? padded.size() - 2 : 1;
    for (std::size_t g = 0; g < grams; ++g) {
        const std::string gram = utf8::encode(std::u32string_view(padded).substr(g, 3));
        const std::uint64_t h = fnv1a(gram, 14695981039346656037ull ^ (seed_ * 0x9E3779B97F4A7C15ull));
        const double* row = table_.data() + (h % rows_) * dim_;
        for (std::size_t k = 0; k < dim_; ++k) v[k] += row[k];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

EmbeddingSequence ToyEmbedder::embed(const TokenizedText& tk, bool append_cls) const {
    EmbeddingSequence emb;
    emb.n = tk.size();
    emb.d = dim_;
    emb.offsets = tk.offsets;
    emb.provenance = Provenance::toy;
    emb.values.reserve((emb.n + 1) * dim_);
    for (const auto& t : tk.tokens) {
        const auto v = token_vector(t);
        emb.values.insert(emb.values.end(), v.begin(), v.end());
    }
    if (append_cls) append_mean_cls(emb);
    (void)tk.text_length;
    return emb;
}

void append_mean_cls(EmbeddingSequence& emb) {
    if (emb.has_cls) return;
    const std::size_t rows = emb.n;
    std::vector<double> cls(emb.d, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t k = 0; k < emb.d; ++k) cls[k] += emb.values[i * emb.d + k];
    for (double& x : cls) x /= static_cast<double>(std::max<std::size_t>(rows, 1));
    emb.values.insert(emb.values.end(), cls.begin(), cls.end());
    const std::size_t end = emb.offsets.empty() ? 0 : emb.offsets.back().x2;
    emb.offsets.push_back({end, end});
    emb.n += 1;
    emb.has_cls = true;
}

EmbeddingSequence toy_embed(const TokenizedText& tk, std::size_t dim, std::uint64_t seed) {
    return ToyEmbedder(dim, seed).embed(tk);
}

std::string text_hash(std::string_view text) {
    static const char* hex = "0123456789abcdef";
    std::uint64_t h = fnv1a(text);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = hex[h & 0xF];
        h >>= 4;
    }
    return out;
}

}  // namespace spandet
