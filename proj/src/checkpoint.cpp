#include "spandet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

namespace spandet {

static_assert(std::endian::native == std::endian::little, "checkpoints are written in host order; big-endian hosts are unsupported");

nlohmann::ordered_json to_json(const ModelConfig& cfg) {
    return {{"d_model", cfg.d_model},
            {"hidden", cfg.width()},
            {"enc_layers", cfg.enc_layers},
            {"dec_layers", cfg.dec_layers},
            {"heads", cfg.heads},
            {"ffn_mult", cfg.ffn_mult},
            {"num_queries", cfg.num_queries},
            {"max_tokens", cfg.max_tokens},
            {"dn_groups", cfg.dn_groups},
            {"dn_center_noise", cfg.dn_center_noise},
            {"dn_width_noise", cfg.dn_width_noise},
            {"temperature", cfg.temperature},
            {"detach_anchors", cfg.detach_anchors}};
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig cfg) {
    if (!j.is_object()) throw std::invalid_argument("model config must be a JSON object");
    static const std::set<std::string> known{"d_model",    "hidden",    "enc_layers", "dec_layers",      "heads",          "ffn_mult",
                                             "num_queries", "max_tokens", "dn_groups", "dn_center_noise", "dn_width_noise", "temperature",
                                             "detach_anchors"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw std::invalid_argument("unknown model config key '" + key + "'");
    auto take = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j[key].get<std::remove_reference_t<decltype(field)>>();
    };
    take("d_model", cfg.d_model);
    take("hidden", cfg.hidden);
    take("enc_layers", cfg.enc_layers);
    take("dec_layers", cfg.dec_layers);
    take("heads", cfg.heads);
    take("ffn_mult", cfg.ffn_mult);
    take("num_queries", cfg.num_queries);
    take("max_tokens", cfg.max_tokens);
    take("dn_groups", cfg.dn_groups);
    take("dn_center_noise", cfg.dn_center_noise);
    take("dn_width_noise", cfg.dn_width_noise);
    take("temperature", cfg.temperature);
    take("detach_anchors", cfg.detach_anchors);
    return cfg;
}

namespace {

constexpr char kMagic[4] = {'S', 'D', 'C', 'K'};

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error(path.string() + ": truncated checkpoint");
    return v;
}

std::string get_string(std::istream& is, const std::filesystem::path& path, std::size_t len) {
    std::string s(len, '\0');
    if (len && !is.read(s.data(), static_cast<std::streamsize>(len))) throw std::runtime_error(path.string() + ": truncated checkpoint");
    return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const DetectionTransformer& model, const nlohmann::ordered_json& meta) {
    const nlohmann::ordered_json header = {{"config", to_json(model.config())}, {"meta", meta}};
    const std::string text = header.dump();
    // Write to a sibling file first so a crash never leaves a torn checkpoint.
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write checkpoint " + tmp.string());
        os.write(kMagic, 4);
        put<std::uint32_t>(os, kCheckpointFormatVersion);
        put<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
        os.write(text.data(), static_cast<std::streamsize>(text.size()));
        const ParameterStore& params = model.params();
        put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
        for (const auto& p : params) {
            put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
            os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
            put<std::uint32_t>(os, static_cast<std::uint32_t>(p.shape.size()));
            for (auto d : p.shape) put<std::uint64_t>(os, d);
            os.write(reinterpret_cast<const char*>(p.value->data()), static_cast<std::streamsize>(p.value->size() * sizeof(double)));
        }
        if (!os) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error(path.string() + ": not a checkpoint (bad magic)");
    const auto version = get<std::uint32_t>(is, path);
    if (version != kCheckpointFormatVersion)
        throw std::runtime_error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    const auto header_len = get<std::uint32_t>(is, path);
    const auto header = nlohmann::json::parse(get_string(is, path, header_len));
    Checkpoint ck;
    ck.config = model_config_from_json(header.at("config"));
    ck.meta = nlohmann::ordered_json::parse(header.at("meta").dump());
    const auto count = get<std::uint32_t>(is, path);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = get_string(is, path, get<std::uint32_t>(is, path));
        const auto rank = get<std::uint32_t>(is, path);
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(is, path));
        std::vector<double> values(shape_size(shape));
        if (!values.empty() && !is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double))))
            throw std::runtime_error(path.string() + ": truncated checkpoint in parameter " + name);
        ck.params.add(std::move(name), std::move(shape), std::move(values));
    }
    return ck;
}

DetectionTransformer load_model(const std::filesystem::path& path) {
    Checkpoint ck = load_checkpoint(path);
    return DetectionTransformer(ck.config, std::move(ck.params));
}

}  // namespace spandet
