// spandet: dataset generation and conversion, embedding precomputation,
// training, prediction and evaluation for the interval detector.
//
// Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "spandet/checkpoint.hpp"
#include "spandet/converters.hpp"
#include "spandet/kernels.hpp"
#include "spandet/metrics.hpp"
#include "spandet/synth.hpp"
#include "spandet/trainer.hpp"

#ifdef SPANDET_HAVE_OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
using namespace spandet;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json read_json(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw UsageError("cannot open config file " + p.string());
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw UsageError(p.string() + ": " + e.what());
    }
}

void write_json(const fs::path& p, const ojson& j) {
    std::ofstream os(p, std::ios::trunc);
    if (!os) throw UsageError("cannot write " + p.string());
    os << j.dump(2) << '\n';
}

// Refuses to touch an existing non-empty directory unless overwrite is set,
// in which case it is emptied first.
void prepare_dir(const fs::path& dir, bool overwrite) {
    if (fs::exists(dir) && !fs::is_empty(dir)) {
        if (!overwrite) throw UsageError(dir.string() + " exists and is not empty (pass --overwrite to replace it)");
        fs::remove_all(dir);
    }
    fs::create_directories(dir);
}

void prepare_file(const fs::path& file, bool overwrite) {
    if (fs::exists(file) && !overwrite) throw UsageError(file.string() + " exists (pass --overwrite to replace it)");
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

// Resolved configuration: defaults, then the --config file, then any flag
// given on the command line.
template <typename T>
void overlay(json& cfg, const char* section, const char* key, const std::optional<T>& flag) {
    if (flag) cfg[section][key] = *flag;
}

void merge_file(json& cfg, const std::string& path) {
    if (path.empty()) return;
    const json file = read_json(path);
    if (!file.is_object()) throw UsageError(path + ": config must be a JSON object");
    for (const auto& [section, value] : file.items()) {
        if (!cfg.contains(section)) throw UsageError(path + ": unknown config section '" + section + "'");
        if (cfg[section].is_object() && value.is_object())
            for (const auto& [k, v] : value.items()) cfg[section][k] = v;
        else
            cfg[section] = value;
    }
}

std::vector<AnnotatedText> read_texts(const fs::path& data, const std::string& split) {
    if (fs::is_directory(data)) {
        DatasetSplit s = load_split(data);
        if (split == "train") return s.train;
        if (split == "val") return s.val;
        if (split == "test") return s.test;
        if (split == "all") {
            std::vector<AnnotatedText> all = std::move(s.train);
            all.insert(all.end(), s.val.begin(), s.val.end());
            all.insert(all.end(), s.test.begin(), s.test.end());
            return all;
        }
        throw UsageError("unknown split '" + split + "' (expected train, val, test or all)");
    }
    if (!fs::exists(data)) throw UsageError("dataset not found: " + data.string());
    return load_records(data);
}

// Provider section: {"kind": "toy" | "signal" | "files", "dim", "seed", "signal", "dir", "cls"}
json default_provider() { return {{"kind", "toy"}, {"dim", 32}, {"seed", 7}, {"signal", 5.0}, {"dir", ""}, {"cls", false}}; }

std::unique_ptr<EmbeddingProvider> make_provider(const json& p) {
    const std::string kind = p.at("kind").get<std::string>();
    const auto dim = p.at("dim").get<std::size_t>();
    const auto seed = p.at("seed").get<std::uint64_t>();
    const bool cls = p.value("cls", false);
    if (kind == "toy") return std::make_unique<ToyProvider>(dim, seed, cls);
    if (kind == "signal") return std::make_unique<SignalProvider>(dim, seed, p.at("signal").get<double>(), cls);
    if (kind == "files") {
        const auto dir = p.at("dir").get<std::string>();
        if (dir.empty()) throw UsageError("provider kind 'files' needs --emb-dir");
        return std::make_unique<FileProvider>(dir, dim);
    }
    throw UsageError("unknown provider kind '" + kind + "' (expected toy, signal or files)");
}

struct ProviderFlags {
    std::optional<std::string> kind, dir;
    std::optional<std::size_t> dim;
    std::optional<std::uint64_t> seed;
    std::optional<double> signal;

    void add(CLI::App* app) {
        app->add_option("--provider", kind, "Embedding provider: toy, signal (synthetic data only) or files");
        app->add_option("--emb-dim", dim, "Embedding dimension");
        app->add_option("--emb-seed", seed, "Seed of the toy embedding table");
        app->add_option("--signal", signal, "Signal strength of the signal provider");
        app->add_option("--emb-dir", dir, "Directory of <id>.emb files for the files provider");
    }
    void apply(json& cfg) const {
        overlay(cfg, "provider", "kind", kind);
        overlay(cfg, "provider", "dim", dim);
        overlay(cfg, "provider", "seed", seed);
        overlay(cfg, "provider", "signal", signal);
        overlay(cfg, "provider", "dir", dir);
    }
};

void set_threads(int threads) {
#ifdef SPANDET_HAVE_OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    std::string out, config;
    bool overwrite = false;
    std::optional<std::size_t> n, sentences, min_words, max_words, max_intervals, vocabulary;
    std::optional<std::uint64_t> seed;
    std::optional<double> signal, val_fraction, test_fraction;
    std::optional<std::string> mode;
};

int cmd_generate(const GenerateArgs& a) {
    json cfg = {{"generate", json::parse(SynthSpec{}.to_json().dump())}, {"seed", 0}};
    merge_file(cfg, a.config);
    overlay(cfg, "generate", "n_texts", a.n);
    overlay(cfg, "generate", "sentences", a.sentences);
    overlay(cfg, "generate", "min_words", a.min_words);
    overlay(cfg, "generate", "max_words", a.max_words);
    overlay(cfg, "generate", "max_intervals", a.max_intervals);
    overlay(cfg, "generate", "vocabulary", a.vocabulary);
    overlay(cfg, "generate", "signal", a.signal);
    overlay(cfg, "generate", "val_fraction", a.val_fraction);
    overlay(cfg, "generate", "test_fraction", a.test_fraction);
    overlay(cfg, "generate", "mode", a.mode);
    if (a.seed) cfg["seed"] = *a.seed;

    const json& g = cfg["generate"];
    SynthSpec spec;
    spec.n_texts = g.at("n_texts").get<std::size_t>();
    spec.mode = synth_mode_from_name(g.at("mode").get<std::string>());
    spec.sentences = g.at("sentences").get<std::size_t>();
    spec.min_words = g.at("min_words").get<std::size_t>();
    spec.max_words = g.at("max_words").get<std::size_t>();
    spec.max_intervals = g.at("max_intervals").get<std::size_t>();
    spec.signal = g.at("signal").get<double>();
    spec.val_fraction = g.at("val_fraction").get<double>();
    spec.test_fraction = g.at("test_fraction").get<double>();
    spec.vocabulary = g.at("vocabulary").get<std::size_t>();
    spec.validate();
    const auto seed = cfg["seed"].get<std::uint64_t>();

    const DatasetSplit split = synth_generate(spec, seed);
    prepare_dir(a.out, a.overwrite);
    save_split(a.out, split);
    write_json(fs::path(a.out) / "meta.json", {{"generator", spec.to_json()}, {"seed", seed}});
    std::cout << "wrote " << split.train.size() << " train, " << split.val.size() << " val, " << split.test.size() << " test texts to "
              << a.out << '\n';
    return 0;
}

// ---------------------------------------------------------------- convert

struct ConvertArgs {
    std::string format, in, out;
    bool strict = false, overwrite = false;
    double val_fraction = 0.1, test_fraction = 0.1;
};

int cmd_convert(const ConvertArgs& a) {
    const SourceFormat fmt = source_format_from_name(a.format);
    if (a.val_fraction < 0 || a.test_fraction < 0 || a.val_fraction + a.test_fraction >= 1.0)
        throw UsageError("val and test fractions must be non-negative and sum below 1");
    ConversionStats stats;
    std::vector<AnnotatedText> recs = convert_file(fmt, a.in, a.strict, stats);
    for (const auto& w : stats.warnings) std::cerr << "warning: skipped " << w << '\n';

    // Deterministic split: the trailing records go to val, then test.
    const std::size_t n = recs.size();
    const auto n_test = static_cast<std::size_t>(std::llround(a.test_fraction * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(a.val_fraction * static_cast<double>(n)));
    DatasetSplit split;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n - n_val - n_test)
            split.train.push_back(std::move(recs[i]));
        else if (i < n - n_test)
            split.val.push_back(std::move(recs[i]));
        else
            split.test.push_back(std::move(recs[i]));
    }
    prepare_dir(a.out, a.overwrite);
    save_split(a.out, split);

    ojson hist = ojson::object();
    for (const auto& [k, v] : stats.interval_histogram) hist[std::to_string(k)] = v;
    const ojson summary = {{"format", a.format},   {"input", a.in},        {"records", stats.records},
                           {"converted", stats.converted}, {"skipped", stats.skipped}, {"interval_histogram", hist}};
    write_json(fs::path(a.out) / "conversion.json", summary);
    std::cout << "converted " << stats.converted << " of " << stats.records << " records (" << stats.skipped << " skipped)\n";
    std::cout << "interval count histogram:\n";
    for (const auto& [k, v] : stats.interval_histogram) std::cout << "  " << k << " intervals: " << v << " texts\n";
    return 0;
}

// ---------------------------------------------------------------- embed

struct EmbedArgs {
    std::string data, split = "all", out, config;
    bool overwrite = false, cls = false;
    ProviderFlags provider;
};

int cmd_embed(const EmbedArgs& a) {
    json cfg = {{"provider", default_provider()}};
    merge_file(cfg, a.config);
    a.provider.apply(cfg);
    if (a.cls) cfg["provider"]["cls"] = true;
    if (cfg["provider"]["kind"] == "files") throw UsageError("embed needs a computing provider (toy or signal)");
    const auto provider = make_provider(cfg["provider"]);
    const auto texts = read_texts(a.data, a.split);
    prepare_dir(a.out, a.overwrite);
    const auto prov = cfg["provider"]["kind"] == "signal" ? Provenance::finetuned : Provenance::toy;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(texts.size()); ++i) {
        const auto& t = texts[static_cast<std::size_t>(i)];
        const TokenizedText tk = tokenize(t.text);
        EmbeddingSequence emb = provider->embed({t.id, t.text, tk, t.intervals});
        emb.provenance = prov;
        const fs::path path = FileProvider::path_for(a.out, t.id);
        save_embeddings(path, emb);
        write_sidecar(path, t.text, emb);
    }
    write_json(fs::path(a.out) / "provider.json", ojson::parse(cfg["provider"].dump()));
    std::cout << "wrote embeddings for " << texts.size() << " texts to " << a.out << '\n';
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string data, out, config;
    bool overwrite = false;
    std::optional<std::string> preset;
    ProviderFlags provider;
    std::optional<std::size_t> hidden, heads, enc_layers, dec_layers, queries, max_tokens, dn_groups, ffn_mult;
    std::optional<double> dn_center_noise, dn_width_noise;
    std::optional<std::size_t> epochs, batch_size, grad_accum;
    std::optional<double> lr, weight_decay, warmup_fraction, clip_norm;
    std::optional<std::uint64_t> seed;
    std::optional<bool> parallel;
    int threads = 0;
};

json train_defaults(const std::optional<std::string>& preset) {
    ModelConfig mc;
    TrainConfig tc;
    if (preset) {
        mc = ModelConfig::preset(*preset);
        tc = TrainConfig::preset(*preset);
    } else {
        // Desk-scale defaults for the toy providers.
        mc.d_model = 32;
        mc.hidden = 32;
        mc.heads = 4;
        tc.epochs = 10;
        tc.lr = 1e-3;
        tc.grad_accum = 1;
    }
    return {{"data", ""}, {"provider", default_provider()}, {"model", json::parse(to_json(mc).dump())}, {"train", json::parse(to_json(tc).dump())}};
}

int cmd_train(const TrainArgs& a) {
    std::optional<std::string> preset = a.preset;
    if (!preset && !a.config.empty()) {
        const json file = read_json(a.config);
        if (file.contains("preset")) preset = file["preset"].get<std::string>();
    }
    json cfg = train_defaults(preset);
    cfg["preset"] = preset ? json(*preset) : json(nullptr);
    merge_file(cfg, a.config);
    if (!a.data.empty()) cfg["data"] = a.data;
    a.provider.apply(cfg);
    overlay(cfg, "model", "hidden", a.hidden);
    overlay(cfg, "model", "heads", a.heads);
    overlay(cfg, "model", "enc_layers", a.enc_layers);
    overlay(cfg, "model", "dec_layers", a.dec_layers);
    overlay(cfg, "model", "num_queries", a.queries);
    overlay(cfg, "model", "max_tokens", a.max_tokens);
    overlay(cfg, "model", "dn_groups", a.dn_groups);
    overlay(cfg, "model", "ffn_mult", a.ffn_mult);
    overlay(cfg, "model", "dn_center_noise", a.dn_center_noise);
    overlay(cfg, "model", "dn_width_noise", a.dn_width_noise);
    overlay(cfg, "train", "epochs", a.epochs);
    overlay(cfg, "train", "batch_size", a.batch_size);
    overlay(cfg, "train", "grad_accum", a.grad_accum);
    overlay(cfg, "train", "lr", a.lr);
    overlay(cfg, "train", "weight_decay", a.weight_decay);
    overlay(cfg, "train", "warmup_fraction", a.warmup_fraction);
    overlay(cfg, "train", "clip_norm", a.clip_norm);
    overlay(cfg, "train", "seed", a.seed);
    overlay(cfg, "train", "parallel_batch", a.parallel);
    // The model consumes whatever the provider emits.
    cfg["model"]["d_model"] = cfg["provider"]["dim"];

    const std::string data = cfg["data"].get<std::string>();
    if (data.empty()) throw UsageError("train needs --data");
    ModelConfig mc = model_config_from_json(cfg["model"]);
    mc.validate();
    TrainConfig tc = train_config_from_json(cfg["train"]);
    tc.validate();
    const auto provider = make_provider(cfg["provider"]);
    if (!fs::is_directory(data)) throw UsageError("dataset directory not found: " + data);
    const DatasetSplit split = load_split(data);
    if (split.train.empty()) throw UsageError(data + " has no training texts");

    prepare_dir(a.out, a.overwrite);
    const fs::path run(a.out);
    write_json(run / "config.json", ojson::parse(cfg.dump()));

    const auto train_set = prepare_samples(split.train, *provider, mc);
    const auto val_set = prepare_samples(split.val, *provider, mc);
    DetectionTransformer model(mc, tc.seed);

    std::ofstream log(run / "metrics.jsonl");
    const ojson meta = {{"provider", ojson::parse(cfg["provider"].dump())}};
    const TrainResult result = train(model, train_set, val_set, tc, [&](const EpochLog& e, const DetectionTransformer& m, bool best) {
        log << to_json(e).dump() << '\n';
        log.flush();
        std::printf("epoch %3zu  lr %.2e  loss %.4f  val %.4f  val_iou %.3f  %.1fs%s\n", e.epoch, e.lr, e.train_loss, e.val_loss, e.val_iou,
                    e.seconds, best ? "  *" : "");
        std::fflush(stdout);
        if (best) save_checkpoint(run / "best.ckpt", m, meta);
    });
    save_checkpoint(run / "last.ckpt", model, meta);
    write_json(run / "summary.json", {{"best_epoch", result.best_epoch}, {"best_val_loss", result.best_val_loss}, {"epochs", result.logs.size()}});
    std::cout << "best epoch " << result.best_epoch << " (val loss " << result.best_val_loss << "), checkpoints in " << a.out << '\n';
    return 0;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
    std::string checkpoint, data, split = "test", out, config;
    bool overwrite = false;
    ProviderFlags provider;
};

int cmd_predict(const PredictArgs& a) {
    if (!fs::exists(a.checkpoint)) throw UsageError("checkpoint not found: " + a.checkpoint);
    Checkpoint ck = load_checkpoint(a.checkpoint);
    json cfg = {{"provider", default_provider()}};
    if (ck.meta.contains("provider")) cfg["provider"] = json::parse(ck.meta["provider"].dump());
    merge_file(cfg, a.config);
    a.provider.apply(cfg);
    const auto provider = make_provider(cfg["provider"]);
    const DetectionTransformer model(ck.config, std::move(ck.params));
    const auto texts = read_texts(a.data, a.split);
    const auto samples = prepare_samples(texts, *provider, model.config());
    std::vector<TextPrediction> preds(samples.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(samples.size()); ++i)
        preds[static_cast<std::size_t>(i)] = predict_sample(model, samples[static_cast<std::size_t>(i)]);
    prepare_file(a.out, a.overwrite);
    save_predictions(a.out, preds);
    std::cout << "wrote predictions for " << preds.size() << " texts to " << a.out << '\n';
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string gold, split = "test", pred, out;
    bool overwrite = false;
    std::size_t k = 3;
    double overlap = 0.94, score = 0.5;
};

int cmd_eval(const EvalArgs& a) {
    const auto gold = read_texts(a.gold, a.split);
    if (!fs::exists(a.pred)) throw UsageError("predictions not found: " + a.pred);
    const auto preds = load_predictions(a.pred);
    if (a.k == 0) throw UsageError("--k must be positive");
    if (a.overlap < 0 || a.overlap > 1) throw UsageError("--overlap-threshold must lie in [0, 1]");
    EvalConfig ec{a.k, a.overlap, a.score};
    ojson report = evaluate(gold, preds, ec);
    report["inputs"] = {{"gold", a.gold}, {"split", a.split}, {"predictions", a.pred}};
    if (!a.out.empty()) {
        prepare_file(a.out, a.overwrite);
        write_json(a.out, report);
    }
    std::cout << report.dump(2) << '\n';
    return 0;
}

// ---------------------------------------------------------------- reference

std::string reference_page(const CLI::App& app) {
    std::string md = "# spandet command reference\n\nGenerated by `spandet reference`.\n\n";
    md += "Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.\n\n";
    md += "Commands that take `--config` read a JSON file whose sections fill in defaults; flags given on the command line win. "
          "`train` writes the fully resolved configuration to `<out>/config.json`, which can be passed back with `--config`.\n";
    for (const CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
        md += "\n## " + sub->get_name() + "\n\n" + sub->get_description() + "\n\n| flag | description | default |\n|---|---|---|\n";
        for (const CLI::Option* opt : sub->get_options()) {
            if (opt->get_name() == "--help") continue;
            std::string desc = opt->get_description();
            md += "| `" + opt->get_name() + "` | " + desc + " | " + (opt->get_default_str().empty() ? "" : "`" + opt->get_default_str() + "`") + " |\n";
        }
    }
    return md;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interval detector for machine-generated text spans"};
    app.require_subcommand(1);
    int threads = 0;
    bool serial_kernels = false;
    app.add_option("--threads", threads, "OpenMP thread count (0 keeps the runtime default)");
    app.add_flag("--serial-kernels", serial_kernels, "Use the serial reference kernels");

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "Write a synthetic mixed-authorship corpus (train/val/test.jsonl and meta.json)");
    gen->add_option("--out", ga.out, "Output directory")->required();
    gen->add_option("--config", ga.config, "JSON file with a \"generate\" section and \"seed\"");
    gen->add_option("--n", ga.n, "Number of texts");
    gen->add_option("--seed", ga.seed, "Random seed");
    gen->add_option("--signal", ga.signal, "Signal strength recorded for the signal provider (>= 0)");
    gen->add_option("--mode", ga.mode, "roft (one boundary per text) or mixed (balanced labels)");
    gen->add_option("--sentences", ga.sentences, "Sentences per text");
    gen->add_option("--min-words", ga.min_words, "Minimum words per sentence");
    gen->add_option("--max-words", ga.max_words, "Maximum words per sentence");
    gen->add_option("--max-intervals", ga.max_intervals, "Maximum intervals in a collaborative text (mixed mode)");
    gen->add_option("--vocabulary", ga.vocabulary, "Pseudo-word vocabulary size");
    gen->add_option("--val-fraction", ga.val_fraction, "Fraction of texts for validation");
    gen->add_option("--test-fraction", ga.test_fraction, "Fraction of texts for test");
    gen->add_flag("--overwrite", ga.overwrite, "Replace an existing output directory");

    ConvertArgs ca;
    auto* conv = app.add_subcommand("convert", "Convert RoFT, CoAuthor or TriBERT style JSON lines to the dataset format");
    conv->add_option("--format", ca.format, "roft, coauthor or tribert")->required();
    conv->add_option("--in", ca.in, "Input JSON lines file")->required();
    conv->add_option("--out", ca.out, "Output dataset directory")->required();
    conv->add_flag("--strict", ca.strict, "Fail on the first malformed record instead of skipping it");
    conv->add_option("--val-fraction", ca.val_fraction, "Fraction of records for validation")->capture_default_str();
    conv->add_option("--test-fraction", ca.test_fraction, "Fraction of records for test")->capture_default_str();
    conv->add_flag("--overwrite", ca.overwrite, "Replace an existing output directory");

    EmbedArgs ea;
    auto* emb = app.add_subcommand("embed", "Precompute embedding files (<id>.emb plus a .json sidecar) for a dataset");
    emb->add_option("--data", ea.data, "Dataset directory or JSON lines file")->required();
    emb->add_option("--split", ea.split, "train, val, test or all when --data is a directory")->capture_default_str();
    emb->add_option("--out", ea.out, "Output directory")->required();
    emb->add_option("--config", ea.config, "JSON file with a \"provider\" section");
    emb->add_flag("--cls", ea.cls, "Append a mean-pooled CLS row");
    ea.provider.add(emb);
    emb->add_flag("--overwrite", ea.overwrite, "Replace an existing output directory");

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "Train the detector; writes config.json, metrics.jsonl, best.ckpt and last.ckpt");
    tr->add_option("--data", ta.data, "Dataset directory with train.jsonl and val.jsonl");
    tr->add_option("--out", ta.out, "Run directory")->required();
    tr->add_option("--config", ta.config, "JSON file with data, preset, provider, model and train sections");
    tr->add_option("--preset", ta.preset, "Reference setup: roft, roft-chatgpt, coauthor or tribert");
    ta.provider.add(tr);
    tr->add_option("--hidden", ta.hidden, "Transformer width");
    tr->add_option("--heads", ta.heads, "Attention heads");
    tr->add_option("--enc-layers", ta.enc_layers, "Encoder layers");
    tr->add_option("--dec-layers", ta.dec_layers, "Decoder layers");
    tr->add_option("--ffn-mult", ta.ffn_mult, "Feed-forward width multiplier");
    tr->add_option("--queries", ta.queries, "Learnable anchor queries");
    tr->add_option("--max-tokens", ta.max_tokens, "Maximum tokens per text");
    tr->add_option("--dn-groups", ta.dn_groups, "Denoising groups (0 disables denoising)");
    tr->add_option("--dn-center-noise", ta.dn_center_noise, "Denoising center noise scale");
    tr->add_option("--dn-width-noise", ta.dn_width_noise, "Denoising width noise scale");
    tr->add_option("--epochs", ta.epochs, "Training epochs");
    tr->add_option("--batch-size", ta.batch_size, "Texts per batch");
    tr->add_option("--grad-accum", ta.grad_accum, "Batches per optimizer step");
    tr->add_option("--lr", ta.lr, "Peak learning rate");
    tr->add_option("--weight-decay", ta.weight_decay, "Decoupled weight decay");
    tr->add_option("--warmup-fraction", ta.warmup_fraction, "Fraction of steps spent in linear warmup");
    tr->add_option("--clip-norm", ta.clip_norm, "Global gradient norm limit");
    tr->add_option("--seed", ta.seed, "Seed for initialization, shuffling and denoising noise");
    tr->add_option("--parallel-batch", ta.parallel, "Process the texts of a batch on separate threads (true/false)");
    tr->add_flag("--overwrite", ta.overwrite, "Replace an existing run directory");

    PredictArgs pa;
    auto* pr = app.add_subcommand("predict", "Write one JSON line per text with character intervals and scores");
    pr->add_option("--checkpoint", pa.checkpoint, "Checkpoint file")->required();
    pr->add_option("--data", pa.data, "Dataset directory or JSON lines file")->required();
    pr->add_option("--split", pa.split, "train, val, test or all when --data is a directory")->capture_default_str();
    pr->add_option("--out", pa.out, "Output predictions file")->required();
    pr->add_option("--config", pa.config, "JSON file with a \"provider\" section (defaults to the one stored in the checkpoint)");
    pa.provider.add(pr);
    pr->add_flag("--overwrite", pa.overwrite, "Replace an existing output file");

    EvalArgs va;
    auto* ev = app.add_subcommand("eval", "Score predictions against a dataset and print the metric report");
    ev->add_option("--gold", va.gold, "Dataset directory or JSON lines file")->required();
    ev->add_option("--split", va.split, "train, val, test or all when --gold is a directory")->capture_default_str();
    ev->add_option("--pred", va.pred, "Predictions file")->required();
    ev->add_option("--out", va.out, "Also write the report to this JSON file");
    ev->add_option("--k", va.k, "K for F1@K")->capture_default_str();
    ev->add_option("--overlap-threshold", va.overlap, "Sentence overlap above which a sentence counts as generated")->capture_default_str();
    ev->add_option("--score-threshold", va.score, "Minimum interval score used for labels and boundaries")->capture_default_str();
    ev->add_flag("--overwrite", va.overwrite, "Replace an existing report file");

    double pue = 1.3, kwh = 0, intensity = 0;
    auto* co2 = app.add_subcommand("co2", "Estimate training emissions in kg CO2");
    co2->add_option("--pue", pue, "Power usage effectiveness")->capture_default_str();
    co2->add_option("--kwh", kwh, "Energy in kWh")->required();
    co2->add_option("--intensity", intensity, "Grid carbon intensity in g/kWh")->required();

    std::string ref_out;
    auto* ref = app.add_subcommand("reference", "Print this command reference as Markdown");
    ref->add_option("--out", ref_out, "Write to a file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    set_threads(threads);
    if (serial_kernels) kernels::set_mode(kernels::Mode::serial);

    try {
        if (*gen) return cmd_generate(ga);
        if (*conv) return cmd_convert(ca);
        if (*emb) return cmd_embed(ea);
        if (*tr) return cmd_train(ta);
        if (*pr) return cmd_predict(pa);
        if (*ev) return cmd_eval(va);
        if (*co2) {
            std::printf("%.6f\n", co2_estimate(pue, kwh, intensity));
            return 0;
        }
        if (*ref) {
            const std::string md = reference_page(app);
            if (ref_out.empty())
                std::cout << md;
            else
                std::ofstream(ref_out) << md;
            return 0;
        }
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
