#pragma once

// Tokenization with exact character offsets, per-token embeddings, and the
// provider interface that turns a text into an embedding sequence.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spandet/geometry.hpp"
#include "spandet/tensor.hpp"

namespace spandet {

struct TokenizedText {
    std::vector<std::string> tokens;
    std::vector<CharSpan> offsets;  // sorted, non-overlapping, one per token
    std::size_t text_length = 0;    // in code points

    std::size_t size() const { return tokens.size(); }
};

/// Splits on whitespace; every punctuation character is its own token and
/// maximal runs of other characters form words. Throws std::invalid_argument
/// on empty or whitespace-only text.
TokenizedText tokenize(std::string_view text);

/// Smallest run of whole tokens whose char midpoints fall inside span; the
/// second member is the total number of characters the snap moved.
std::pair<CharSpan, std::size_t> snap_to_tokens(const CharSpan& span, const TokenizedText& tk);

enum class Provenance : std::uint8_t { toy = 0, pretrained = 1, finetuned = 2 };

const char* provenance_name(Provenance p);
Provenance provenance_from_name(std::string_view name);

/// n x d matrix of per-token vectors aligned with offsets. When has_cls is
/// set the final row is a [CLS] summary state whose offset is the empty span
/// (text_length, text_length).
struct EmbeddingSequence {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> values;  // row-major
    std::vector<CharSpan> offsets;
    Provenance provenance = Provenance::toy;
    bool has_cls = false;

    std::size_t token_rows() const { return has_cls ? n - 1 : n; }
    std::span<const double> row(std::size_t i) const { return std::span<const double>(values).subspan(i * d, d); }
    std::span<double> row(std::size_t i) { return std::span<double>(values).subspan(i * d, d); }

    /// [token_rows, d] tensor without the CLS row.
    Tensor token_tensor() const;
    /// [n, d] tensor including the CLS row when present.
    Tensor full_tensor() const;
    /// Normalized char midpoints of the token rows.
    std::vector<double> positions(std::size_t text_length) const;
};

/// Deterministic stand-in for an LLM encoder: each token maps to the
/// L2-normalized sum of fixed random vectors indexed by hashed character
/// trigrams of the token surface. Same token, same vector.
class ToyEmbedder {
  public:
    ToyEmbedder(std::size_t dim, std::uint64_t seed, std::size_t table_rows = 4096);

    std::size_t dim() const { return dim_; }
    std::vector<double> token_vector(std::string_view token) const;
    /// With append_cls the final row is the mean of the token rows.
    EmbeddingSequence embed(const TokenizedText& tk, bool append_cls = false) const;

  private:
    std::size_t dim_;
    std::uint64_t seed_;
    std::size_t rows_;
    std::vector<double> table_;
};

EmbeddingSequence toy_embed(const TokenizedText& tk, std::size_t dim, std::uint64_t seed);

/// Appends a CLS row equal to the mean of the token rows.
void append_mean_cls(EmbeddingSequence& emb);

struct EmbedRequest {
    std::string_view id;
    std::string_view text;
    const TokenizedText& tokens;
    std::span<const CharSpan> annotated;  // ground truth, for synthetic providers only
};

class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;
    virtual EmbeddingSequence embed(const EmbedRequest& req) const = 0;
    virtual std::size_t dim() const = 0;
    virtual std::string name() const = 0;
};

class ToyProvider : public EmbeddingProvider {
  public:
    ToyProvider(std::size_t dim, std::uint64_t seed, bool append_cls = false) : embedder_(dim, seed), cls_(append_cls) {}
    EmbeddingSequence embed(const EmbedRequest& req) const override { return embedder_.embed(req.tokens, cls_); }
    std::size_t dim() const override { return embedder_.dim(); }
    std::string name() const override { return "toy"; }

  private:
    ToyEmbedder embedder_;
    bool cls_;
};

/// Reads <dir>/<id>.emb, checking the sidecar text hash when one exists.
class FileProvider : public EmbeddingProvider {
  public:
    FileProvider(std::filesystem::path dir, std::size_t dim);
    EmbeddingSequence embed(const EmbedRequest& req) const override;
    std::size_t dim() const override { return dim_; }
    std::string name() const override { return "files"; }

    static std::filesystem::path path_for(const std::filesystem::path& dir, std::string_view id);

  private:
    std::filesystem::path dir_;
    std::size_t dim_;
};

// Binary embedding container, little-endian:
//   "SDEM" | u32 version | u32 n | u32 d | u8 provenance |
//   n x (u32 x1, u32 x2) | n*d x f32 row-major
// A CLS row, when present, is the last row with the empty offset
// (text_length, text_length).
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

void save_embeddings(const std::filesystem::path& path, const EmbeddingSequence& emb);
EmbeddingSequence load_embeddings(const std::filesystem::path& path);
/// Also checks that the row count matches tk (plus an optional CLS row).
EmbeddingSequence load_embeddings(const std::filesystem::path& path, const TokenizedText& tk);

/// 64-bit FNV-1a of the UTF-8 bytes, as 16 hex digits.
std::string text_hash(std::string_view text);
/// JSON sidecar next to an embedding file (<path>.json).
void write_sidecar(const std::filesystem::path& emb_path, std::string_view text, const EmbeddingSequence& emb);
/// Throws std::runtime_error when the sidecar exists and its hash differs.
void verify_sidecar(const std::filesystem::path& emb_path, std::string_view text);

}  // namespace spandet
