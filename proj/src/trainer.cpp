#include "spandet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "spandet/ops.hpp"
#include "spandet/utf8.hpp"

#ifdef SPANDET_HAVE_OPENMP
#include <omp.h>
#endif

namespace spandet {

TrainConfig TrainConfig::preset(const std::string& name) {
    TrainConfig cfg;
    if (name == "roft" || name == "roft-chatgpt") {
        cfg.batch_size = 32;
        cfg.grad_accum = 2;
        cfg.lr = 1e-4;
        cfg.epochs = 75;
    } else if (name == "coauthor") {
        cfg.batch_size = 64;
        cfg.grad_accum = 2;
        cfg.lr = 2e-4;
        cfg.epochs = 100;
    } else if (name == "tribert") {
        cfg.batch_size = 64;
        cfg.grad_accum = 1;
        cfg.lr = 2e-4;
        cfg.epochs = 75;
    } else {
        throw std::invalid_argument("unknown preset " + name);
    }
    return cfg;
}

void TrainConfig::validate() const {
    if (epochs == 0) throw std::invalid_argument("epochs must be positive");
    if (batch_size == 0 || grad_accum == 0) throw std::invalid_argument("batch_size and grad_accum must be positive");
    if (!(lr > 0)) throw std::invalid_argument("lr must be positive");
    if (weight_decay < 0) throw std::invalid_argument("weight_decay must be non-negative");
    if (warmup_fraction < 0 || warmup_fraction >= 1) throw std::invalid_argument("warmup_fraction must be in [0, 1)");
    if (!(clip_norm > 0)) throw std::invalid_argument("clip_norm must be positive");
    const auto& w = loss.weights;
    if (w.span < 0 || w.giou < 0 || w.focal < 0 || w.dn_span < 0 || w.dn_giou < 0)
        throw std::invalid_argument("loss weights must be non-negative");
    if (!(loss.focal.alpha > 0 && loss.focal.alpha < 1) || loss.focal.gamma < 0)
        throw std::invalid_argument("focal alpha must be in (0, 1) and gamma >= 0");
}

nlohmann::ordered_json to_json(const TrainConfig& cfg) {
    const auto& w = cfg.loss.weights;
    return {{"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},
            {"grad_accum", cfg.grad_accum},
            {"lr", cfg.lr},
            {"weight_decay", cfg.weight_decay},
            {"warmup_fraction", cfg.warmup_fraction},
            {"clip_norm", cfg.clip_norm},
            {"seed", cfg.seed},
            {"parallel_batch", cfg.parallel_batch},
            {"aux_layers", cfg.loss.aux_layers},
            {"focal_alpha", cfg.loss.focal.alpha},
            {"focal_gamma", cfg.loss.focal.gamma},
            {"weights", {{"span", w.span}, {"giou", w.giou}, {"focal", w.focal}, {"dn_span", w.dn_span}, {"dn_giou", w.dn_giou}}},
            {"match_weights", {{"span", cfg.loss.match.span}, {"giou", cfg.loss.match.giou}, {"cls", cfg.loss.match.cls}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig cfg) {
    if (!j.is_object()) throw std::invalid_argument("training config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "epochs") cfg.epochs = value.get<std::size_t>();
        else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
        else if (key == "grad_accum") cfg.grad_accum = value.get<std::size_t>();
        else if (key == "lr") cfg.lr = value.get<double>();
        else if (key == "weight_decay") cfg.weight_decay = value.get<double>();
        else if (key == "warmup_fraction") cfg.warmup_fraction = value.get<double>();
        else if (key == "clip_norm") cfg.clip_norm = value.get<double>();
        else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else if (key == "parallel_batch") cfg.parallel_batch = value.get<bool>();
        else if (key == "aux_layers") cfg.loss.aux_layers = value.get<bool>();
        else if (key == "focal_alpha") cfg.loss.focal.alpha = value.get<double>();
        else if (key == "focal_gamma") cfg.loss.focal.gamma = value.get<double>();
        else if (key == "weights") {
            auto& w = cfg.loss.weights;
            w.span = value.value("span", w.span);
            w.giou = value.value("giou", w.giou);
            w.focal = value.value("focal", w.focal);
            w.dn_span = value.value("dn_span", w.dn_span);
            w.dn_giou = value.value("dn_giou", w.dn_giou);
        } else if (key == "match_weights") {
            auto& m = cfg.loss.match;
            m.span = value.value("span", m.span);
            m.giou = value.value("giou", m.giou);
            m.cls = value.value("cls", m.cls);
        } else {
            throw std::invalid_argument("unknown training config key '" + key + "'");
        }
    }
    return cfg;
}

Sample prepare_sample(const AnnotatedText& text, const EmbeddingProvider& provider, const ModelConfig& cfg) {
    const TokenizedText tk = tokenize(text.text);
    EmbeddingSequence emb = provider.embed({text.id, text.text, tk, text.intervals});
    if (emb.d != cfg.d_model)
        throw std::invalid_argument(text.id + ": embedding dimension " + std::to_string(emb.d) + " but the model expects " +
                                    std::to_string(cfg.d_model));
    Sample s;
    s.id = text.id;
    s.text_length = tk.text_length;
    s.spans = text.intervals;
    for (const auto& sp : text.intervals) s.gts.push_back(span_to_cw(sp, tk.text_length));

    const std::size_t rows = std::min(emb.token_rows(), cfg.max_tokens);
    s.input.embeddings = Tensor::from({rows, emb.d}, std::vector<double>(emb.values.begin(), emb.values.begin() + static_cast<std::ptrdiff_t>(rows * emb.d)));
    s.input.positions = emb.positions(tk.text_length);
    s.input.positions.resize(rows);
    return s;
}

std::vector<Sample> prepare_samples(const std::vector<AnnotatedText>& texts, const EmbeddingProvider& provider,
                                    const ModelConfig& cfg) {
    std::vector<Sample> out(texts.size());
#pragma omp parallel for schedule(dynamic) if (texts.size() > 64)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(texts.size()); ++i)
        out[static_cast<std::size_t>(i)] = prepare_sample(texts[static_cast<std::size_t>(i)], provider, cfg);
    return out;
}

nlohmann::ordered_json to_json(const EpochLog& log) {
    const auto& t = log.train_terms;
    return {{"epoch", log.epoch},
            {"lr", log.lr},
            {"train_loss", log.train_loss},
            {"terms", {{"span", t.span}, {"giou", t.giou}, {"focal", t.focal}, {"dn_span", t.dn_span}, {"dn_giou", t.dn_giou}}},
            {"grad_norm", log.grad_norm},
            {"val_loss", log.val_loss},
            {"val_iou", log.val_iou},
            {"seconds", log.seconds}};
}

namespace {

struct SampleResult {
    Gradients grads;
    double loss = 0.0;
    LossTerms terms;
};

// Mixes the run seed, epoch and sample index into an independent stream so
// denoising noise does not depend on thread scheduling.
std::uint64_t sample_seed(std::uint64_t seed, std::size_t epoch, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(epoch),
                      static_cast<std::uint32_t>(index)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// Matching needs finite costs, so a diverged forward pass is caught here.
bool all_finite(const DecoderOutput& out) {
    for (const auto& l : out.layers)
        for (const Tensor* t : {&l.intervals, &l.logits})
            for (double v : t->to_vector())
                if (!std::isfinite(v)) return false;
    return true;
}

SampleResult run_sample(const DetectionTransformer& model, const Sample& s, const LossOptions& opts, std::uint64_t seed) {
    const Binding binding(model.params(), true);
    std::mt19937_64 rng(seed);
    const ModelConfig& cfg = model.config();
    DenoisingBatch dn;
    const bool use_dn = cfg.dn_groups > 0 && !s.gts.empty();
    if (use_dn) dn = make_denoising(s.gts, cfg.denoising(), rng);
    const DecoderOutput out = model.forward(binding, s.input, use_dn ? &dn : nullptr);
    if (!all_finite(out)) return {{}, std::numeric_limits<double>::quiet_NaN(), {}};
    LossBreakdown lb = composite_loss(out, use_dn ? &dn : nullptr, s.gts, opts);
    SampleResult r;
    r.loss = lb.total.item();
    r.terms = lb.final_terms();
    if (!std::isfinite(r.loss)) return r;
    backward(lb.total);
    r.grads = binding.gradients();
    return r;
}

double iou_best(const Prediction& p, const std::vector<Interval>& gts) {
    double total = 0.0;
    for (const auto& g : gts) {
        double best = 0.0;
        for (const auto& iv : p.intervals) best = std::max(best, iou_1d(iv, g));
        total += best;
    }
    return total;
}

}  // namespace

EvalLoss evaluate_loss(const DetectionTransformer& model, const std::vector<Sample>& samples, const LossOptions& opts) {
    EvalLoss r;
    if (samples.empty()) return r;
    const Binding frozen(model.params(), false);
    double iou_sum = 0.0;
    std::size_t gt_count = 0;
    for (const auto& s : samples) {
        const DecoderOutput out = model.forward(frozen, s.input, nullptr);
        if (!all_finite(out)) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
        r.loss += composite_loss(out, nullptr, s.gts, opts).learnable_total.item();
        const Tensor iv = out.learnable_intervals(out.layers.size() - 1);
        Prediction p;
        for (std::size_t q = 0; q < iv.rows(); ++q) p.intervals.push_back({iv.at(q, 0), iv.at(q, 1)});
        iou_sum += iou_best(p, s.gts);
        gt_count += s.gts.size();
    }
    r.loss /= static_cast<double>(samples.size());
    r.iou = gt_count ? iou_sum / static_cast<double>(gt_count) : 0.0;
    return r;
}

TrainResult train(DetectionTransformer& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    cfg.validate();

    const std::size_t n = train_set.size();
    const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t steps_per_epoch = (batches + cfg.grad_accum - 1) / cfg.grad_accum;
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;
    const auto warmup = static_cast<std::size_t>(cfg.warmup_fraction * static_cast<double>(total_steps));

    AdamWConfig acfg;
    acfg.weight_decay = cfg.weight_decay;
    AdamW opt(model.params(), acfg);
    std::mt19937_64 shuffle_rng(cfg.seed);

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(n);
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        EpochLog log;
        log.epoch = epoch;
        Gradients acc;
        std::size_t acc_samples = 0, acc_batches = 0, updates = 0;

        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t lo = b * cfg.batch_size, hi = std::min(n, lo + cfg.batch_size);
            std::vector<SampleResult> results(hi - lo);
#pragma omp parallel for schedule(dynamic) if (cfg.parallel_batch)
            for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(lo); i < static_cast<std::ptrdiff_t>(hi); ++i) {
                const auto k = static_cast<std::size_t>(i);
                results[k - lo] = run_sample(model, train_set[order[k]], cfg.loss, sample_seed(cfg.seed, epoch, order[k]));
            }
            for (std::size_t k = 0; k < results.size(); ++k) {
                const SampleResult& r = results[k];
                if (!std::isfinite(r.loss))
                    throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + " on sample '" + train_set[order[lo + k]].id +
                                         "' (span " + std::to_string(r.terms.span) + ", giou " + std::to_string(r.terms.giou) + ", focal " +
                                         std::to_string(r.terms.focal) + ")");
                if (acc.empty()) {
                    acc = r.grads;
                } else {
                    for (std::size_t p = 0; p < acc.size(); ++p)
                        for (std::size_t j = 0; j < acc[p].size(); ++j) acc[p][j] += r.grads[p][j];
                }
                log.train_loss += r.loss;
                log.train_terms.span += r.terms.span;
                log.train_terms.giou += r.terms.giou;
                log.train_terms.focal += r.terms.focal;
                log.train_terms.dn_span += r.terms.dn_span;
                log.train_terms.dn_giou += r.terms.dn_giou;
            }
            acc_samples += results.size();
            ++acc_batches;
            if (acc_batches == cfg.grad_accum || b + 1 == batches) {
                const double inv = 1.0 / static_cast<double>(acc_samples);
                for (auto& g : acc)
                    for (double& x : g) x *= inv;
                const double norm = clip_grad_norm(acc, cfg.clip_norm);
                if (!std::isfinite(norm)) throw NumericalError("non-finite gradient norm at epoch " + std::to_string(epoch));
                log.grad_norm += norm;
                log.lr = cosine_lr(step, total_steps, cfg.lr, warmup);
                opt.step(model.params(), acc, log.lr);
                ++step;
                ++updates;
                acc.clear();
                acc_samples = 0;
                acc_batches = 0;
            }
        }

        const double inv_n = 1.0 / static_cast<double>(n);
        log.train_loss *= inv_n;
        log.train_terms.span *= inv_n;
        log.train_terms.giou *= inv_n;
        log.train_terms.focal *= inv_n;
        log.train_terms.dn_span *= inv_n;
        log.train_terms.dn_giou *= inv_n;
        log.grad_norm /= static_cast<double>(std::max<std::size_t>(updates, 1));

        if (!val_set.empty()) {
            const EvalLoss ev = evaluate_loss(model, val_set, cfg.loss);
            log.val_loss = ev.loss;
            log.val_iou = ev.iou;
        } else {
            log.val_loss = log.train_loss;
        }
        if (!std::isfinite(log.val_loss)) throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const bool best = log.val_loss < result.best_val_loss;
        if (best) {
            result.best_val_loss = log.val_loss;
            result.best_epoch = epoch;
            result.best_params = model.params().clone();
        }
        result.logs.push_back(log);
        if (on_epoch) on_epoch(log, model, best);
    }
    return result;
}

TextPrediction predict_sample(const DetectionTransformer& model, const Sample& sample) {
    const Prediction p = model.predict(sample.input);
    TextPrediction out;
    out.id = sample.id;
    for (std::size_t q = 0; q < p.intervals.size(); ++q) {
        out.intervals.push_back(cw_to_span(p.intervals[q], sample.text_length));
        out.scores.push_back(p.scores[q]);
    }
    return out;
}

}  // namespace spandet
