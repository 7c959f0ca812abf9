#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "spandet/textproc.hpp"

namespace spandet {

namespace {

static_assert(std::endian::native == std::endian::little, "embedding files are written in host order; big-endian hosts are unsupported");

constexpr char kMagic[4] = {'S', 'D', 'E', 'M'};

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path, const char* what) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw std::runtime_error(path.string() + ": truncated embedding file while reading " + what);
    return v;
}

}  // namespace

void save_embeddings(const std::filesystem::path& path, const EmbeddingSequence& emb) {
    if (emb.values.size() != emb.n * emb.d || emb.offsets.size() != emb.n)
        throw std::invalid_argument("save_embeddings: inconsistent sequence (n=" + std::to_string(emb.n) + ", d=" + std::to_string(emb.d) + ")");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kEmbeddingFormatVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(emb.n));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(emb.d));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(emb.provenance));
    for (const auto& o : emb.offsets) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(o.x1));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(o.x2));
    }
    for (double v : emb.values) put<float>(os, static_cast<float>(v));
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

EmbeddingSequence load_embeddings(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open embedding file " + path.string());
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(path.string() + ": not an embedding file (bad magic)");
    const auto version = get<std::uint32_t>(is, path, "version");
    if (version != kEmbeddingFormatVersion)
        throw std::runtime_error(path.string() + ": unsupported embedding format version " + std::to_string(version));
    EmbeddingSequence emb;
    emb.n = get<std::uint32_t>(is, path, "row count");
    emb.d = get<std::uint32_t>(is, path, "dimension");
    const auto prov = get<std::uint8_t>(is, path, "provenance");
    if (prov > 2) throw std::runtime_error(path.string() + ": unknown provenance code " + std::to_string(prov));
    emb.provenance = static_cast<Provenance>(prov);
    emb.offsets.resize(emb.n);
    for (auto& o : emb.offsets) {
        o.x1 = get<std::uint32_t>(is, path, "offsets");
        o.x2 = get<std::uint32_t>(is, path, "offsets");
    }
    std::vector<float> raw(emb.n * emb.d);
    if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float))))
        throw std::runtime_error(path.string() + ": truncated embedding file while reading values");
    if (is.peek() != std::char_traits<char>::eof())
        throw std::runtime_error(path.string() + ": trailing bytes after embedding values");
    emb.values.assign(raw.begin(), raw.end());
    emb.has_cls = emb.n > 0 && emb.offsets.back().x1 == emb.offsets.back().x2;
    return emb;
}

EmbeddingSequence load_embeddings(const std::filesystem::path& path, const TokenizedText& tk) {
    EmbeddingSequence emb = load_embeddings(path);
    if (emb.token_rows() != tk.size())
        throw std::runtime_error(path.string() + ": " + std::to_string(emb.token_rows()) + " token rows but the text has " +
                                 std::to_string(tk.size()) + " tokens");
    for (std::size_t i = 0; i < tk.size(); ++i)
        if (emb.offsets[i] != tk.offsets[i])
            throw std::runtime_error(path.string() + ": offset of row " + std::to_string(i) + " does not match the tokenizer");
    return emb;
}

void write_sidecar(const std::filesystem::path& emb_path, std::string_view text, const EmbeddingSequence& emb) {
    nlohmann::json j = {
        {"text_hash", text_hash(text)},
        {"n", emb.n},
        {"d", emb.d},
        {"provenance", provenance_name(emb.provenance)},
        {"has_cls", emb.has_cls},
        {"format_version", kEmbeddingFormatVersion},
    };
    std::ofstream os(emb_path.string() + ".json");
    if (!os) throw std::runtime_error("cannot write sidecar for " + emb_path.string());
    os << j.dump(2) << '\n';
}

void verify_sidecar(const std::filesystem::path& emb_path, std::string_view text) {
    const std::filesystem::path side = emb_path.string() + ".json";
    if (!std::filesystem::exists(side)) return;
    std::ifstream is(side);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(side.string() + ": malformed sidecar: " + e.what());
    }
    const std::string expected = j.value("text_hash", "");
    const std::string actual = text_hash(text);
    if (expected != actual)
        throw std::runtime_error(emb_path.string() + ": text hash mismatch (sidecar " + expected + ", text " + actual + ")");
}

FileProvider::FileProvider(std::filesystem::path dir, std::size_t dim) : dir_(std::move(dir)), dim_(dim) {
    if (!std::filesystem::is_directory(dir_)) throw std::runtime_error("embedding directory not found: " + dir_.string());
}

std::filesystem::path FileProvider::path_for(const std::filesystem::path& dir, std::string_view id) {
    std::string safe(id);
    for (char& c : safe)
        if (c == '/' || c == '\\') c = '_';
    return dir / (safe + ".emb");
}

EmbeddingSequence FileProvider::embed(const EmbedRequest& req) const {
    const auto path = path_for(dir_, req.id);
    verify_sidecar(path, req.text);
    EmbeddingSequence emb = load_embeddings(path, req.tokens);
    if (emb.d != dim_)
        throw std::runtime_error(path.string() + ": dimension " + std::to_string(emb.d) + " but the model expects " + std::to_string(dim_));
    return emb;
}

}  // namespace spandet
