#include "spandet/model.hpp"

#include <cmath>
#include <stdexcept>

#include "spandet/ops.hpp"

namespace spandet {

void ModelConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
    const std::size_t h = width();
    if (d_model == 0) fail("d_model must be positive");
    if (h == 0) fail("hidden width resolves to 0");
    if (heads == 0 || h % heads != 0) fail("hidden width " + std::to_string(h) + " not divisible by heads " + std::to_string(heads));
    if (h % 4 != 0) fail("hidden width must be a multiple of 4 for (c, w) sinusoidal encodings");
    if (num_queries == 0) fail("num_queries must be positive");
    if (enc_layers == 0 || dec_layers == 0) fail("layer counts must be positive");
    if (ffn_mult == 0) fail("ffn_mult must be positive");
    if (max_tokens == 0) fail("max_tokens must be positive");
    if (dn_center_noise < 0 || dn_width_noise < 0) fail("denoising noise scales must be non-negative");
}

ModelConfig ModelConfig::preset(const std::string& name) {
    ModelConfig cfg;
    if (name == "roft" || name == "roft-chatgpt") {
        cfg.num_queries = 1;
        cfg.max_tokens = 512;
    } else if (name == "coauthor") {
        cfg.num_queries = 30;
        cfg.max_tokens = 1024;
    } else if (name == "tribert") {
        cfg.num_queries = 18;
        cfg.max_tokens = 1024;
    } else {
        throw std::invalid_argument("unknown preset " + name);
    }
    return cfg;
}

std::vector<double> sinusoidal_encode(double pos, std::size_t dim, double temperature) {
    return sinusoid_embed(Tensor::scalar(pos), dim, temperature).to_vector();
}

std::vector<double> sinusoidal_encode(const Interval& anchor, std::size_t dim, double temperature) {
    if (dim % 4 != 0) throw ShapeError("anchor encoding needs dim divisible by 4, got " + std::to_string(dim));
    return sinusoid_embed(Tensor::from({1, 2}, {anchor.c, anchor.w}), dim / 2, temperature).to_vector();
}

Tensor position_table(const std::vector<double>& positions, std::size_t dim, double temperature) {
    return sinusoid_embed(Tensor::from({positions.size(), 1}, positions), dim, temperature);
}

Tensor multi_head_attention(const std::vector<Tensor>& q_parts, const std::vector<Tensor>& k_parts, const Tensor& v,
                            std::size_t heads, const std::vector<std::uint8_t>& mask) {
    if (q_parts.size() != k_parts.size() || q_parts.empty()) throw ShapeError("attention: query/key part counts differ");
    const std::size_t dv = v.cols() / heads;
    std::size_t qk_dim = 0;
    for (const auto& q : q_parts) qk_dim += q.cols() / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(qk_dim));

    auto head_of = [heads](const std::vector<Tensor>& parts, std::size_t h) {
        std::vector<Tensor> pieces;
        for (const auto& t : parts) {
            const std::size_t d = t.cols() / heads;
            pieces.push_back(heads == 1 ? t : slice(t, 1, h * d, (h + 1) * d));
        }
        return pieces.size() == 1 ? pieces[0] : concat(pieces, 1);
    };

    std::vector<Tensor> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const Tensor qh = head_of(q_parts, h);
        const Tensor kh = head_of(k_parts, h);
        const Tensor vh = heads == 1 ? v : slice(v, 1, h * dv, (h + 1) * dv);
        const Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
        outs.push_back(matmul(softmax(scores, 1, mask), vh));
    }
    return outs.size() == 1 ? outs[0] : concat(outs, 1);
}

DetectionTransformer::DetectionTransformer(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build(seed);
}

DetectionTransformer::DetectionTransformer(ModelConfig cfg, ParameterStore params) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build(0);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& dst = params_[i];
        const auto& src = params[params.index_of(dst.name)];
        if (src.shape != dst.shape)
            throw ShapeError("parameter " + dst.name + ": stored shape " + shape_str(src.shape) + " but config implies " +
                             shape_str(dst.shape));
        *dst.value = *src.value;
    }
}

DetectionTransformer::Linear DetectionTransformer::linear(const std::string& name, std::size_t in, std::size_t out,
                                                          std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    Linear l;
    l.w = params_.add_uniform(name + ".weight", {in, out}, bound, rng);
    l.b = params_.add_zeros(name + ".bias", {1, out});
    return l;
}

DetectionTransformer::Norm DetectionTransformer::norm(const std::string& name) {
    const std::size_t h = cfg_.width();
    Norm n;
    n.g = params_.add_constant(name + ".gain", {1, h}, 1.0);
    n.b = params_.add_zeros(name + ".bias", {1, h});
    return n;
}

void DetectionTransformer::build(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t h = cfg_.width();
    const std::size_t f = h * cfg_.ffn_mult;

    input_proj_ = linear("input_proj", cfg_.d_model, h, rng);
    for (std::size_t l = 0; l < cfg_.enc_layers; ++l) {
        const std::string p = "encoder." + std::to_string(l) + ".";
        EncoderLayer e;
        e.q = linear(p + "q", h, h, rng);
        e.k = linear(p + "k", h, h, rng);
        e.v = linear(p + "v", h, h, rng);
        e.o = linear(p + "o", h, h, rng);
        e.n1 = norm(p + "norm1");
        e.f1 = linear(p + "ffn1", h, f, rng);
        e.f2 = linear(p + "ffn2", f, h, rng);
        e.n2 = norm(p + "norm2");
        enc_.push_back(e);
    }
    for (std::size_t l = 0; l < cfg_.dec_layers; ++l) {
        const std::string p = "decoder." + std::to_string(l) + ".";
        DecoderLayer d;
        d.sq = linear(p + "self_q", h, h, rng);
        d.sk = linear(p + "self_k", h, h, rng);
        d.sv = linear(p + "self_v", h, h, rng);
        d.so = linear(p + "self_o", h, h, rng);
        d.n1 = norm(p + "norm1");
        d.cq_content = linear(p + "cross_q_content", h, h, rng);
        d.cq_pos = linear(p + "cross_q_pos", h, h, rng);
        d.ck_content = linear(p + "cross_k_content", h, h, rng);
        d.ck_pos = linear(p + "cross_k_pos", h, h, rng);
        d.cv = linear(p + "cross_v", h, h, rng);
        d.co = linear(p + "cross_o", h, h, rng);
        d.n2 = norm(p + "norm2");
        d.f1 = linear(p + "ffn1", h, f, rng);
        d.f2 = linear(p + "ffn2", f, h, rng);
        d.n3 = norm(p + "norm3");
        dec_.push_back(d);
    }
    ref_head1_ = linear("ref_point_head.0", h, h, rng);
    ref_head2_ = linear("ref_point_head.1", h, h, rng);
    box_head1_ = linear("box_head.0", h, h, rng);
    box_head2_ = linear("box_head.1", h, 2, rng);
    // Start from zero refinement so the first predictions are the anchors.
    std::fill(params_[box_head2_.w].value->begin(), params_[box_head2_.w].value->end(), 0.0);
    cls_head_ = linear("class_head", h, 1, rng);
    std::fill(params_[cls_head_.b].value->begin(), params_[cls_head_.b].value->end(), -std::log((1.0 - 0.01) / 0.01));

    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> content(cfg_.num_queries * h);
    for (auto& x : content) x = normal(rng);
    query_content_ = params_.add("query.content", {cfg_.num_queries, h}, std::move(content));

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> anchors(cfg_.num_queries * 2);
    for (auto& x : anchors) x = unit(rng);
    anchors_ = params_.add("query.anchor_logit", {cfg_.num_queries, 2}, inverse_sigmoid(Tensor::from({cfg_.num_queries, 2}, anchors)).to_vector());

    std::vector<double> dn(h);
    for (auto& x : dn) x = normal(rng);
    dn_content_ = params_.add("denoising.content", {1, h}, std::move(dn));
}

Tensor DetectionTransformer::apply(const Binding& p, const Linear& l, const Tensor& x) { return add(matmul(x, p[l.w]), p[l.b]); }

Tensor DetectionTransformer::apply(const Binding& p, const Norm& n, const Tensor& x) { return layer_norm(x, p[n.g], p[n.b]); }

Tensor DetectionTransformer::ffn(const Binding& p, const Linear& f1, const Linear& f2, const Tensor& x) const {
    return apply(p, f2, relu(apply(p, f1, x)));
}

Tensor DetectionTransformer::project(const Binding& p, const Tensor& embeddings) const {
    if (embeddings.rank() != 2 || embeddings.cols() != cfg_.d_model)
        throw ShapeError("project: expected [n, " + std::to_string(cfg_.d_model) + "] embeddings, got " +
                         shape_str(embeddings.shape()));
    if (embeddings.rows() > cfg_.max_tokens)
        throw ShapeError("project: " + std::to_string(embeddings.rows()) + " tokens exceed max_tokens " +
                         std::to_string(cfg_.max_tokens));
    return apply(p, input_proj_, embeddings);
}

Tensor DetectionTransformer::encode(const Binding& p, const Tensor& projected, const std::vector<double>& positions) const {
    if (positions.size() != projected.rows())
        throw ShapeError("encode: " + std::to_string(positions.size()) + " positions for " + std::to_string(projected.rows()) + " tokens");
    const Tensor pos = position_table(positions, cfg_.width(), cfg_.temperature);
    Tensor x = projected;
    for (const auto& e : enc_) {
        const Tensor qk_in = x + pos;
        const Tensor attn = multi_head_attention({apply(p, e.q, qk_in)}, {apply(p, e.k, qk_in)}, apply(p, e.v, x), cfg_.heads);
        x = apply(p, e.n1, x + apply(p, e.o, attn));
        x = apply(p, e.n2, x + ffn(p, e.f1, e.f2, x));
    }
    return x;
}

DecoderOutput DetectionTransformer::decode(const Binding& p, const Tensor& memory, const std::vector<double>& positions,
                                           const DenoisingBatch* dn) const {
    const std::size_t h = cfg_.width();
    const std::size_t n = cfg_.num_queries;
    const std::size_t nd = dn ? dn->size() : 0;

    Tensor tgt = p[query_content_];
    Tensor ref_logit = p[anchors_];
    std::vector<std::uint8_t> mask;
    if (nd > 0) {
        tgt = concat({tgt, index_rows(p[dn_content_], std::vector<std::size_t>(nd, 0))}, 0);
        std::vector<double> cw;
        for (const auto& a : dn->anchors) {
            cw.push_back(a.c);
            cw.push_back(a.w);
        }
        ref_logit = concat({ref_logit, inverse_sigmoid(Tensor::from({nd, 2}, std::move(cw)))}, 0);
        mask = dn->attention_mask(n);
    }

    const Tensor mem_pos = position_table(positions, h, cfg_.temperature);
    DecoderOutput out;
    out.num_learnable = n;
    out.num_denoising = nd;
    for (const auto& d : dec_) {
        const Tensor ref = sigmoid(ref_logit);
        const Tensor sine = sinusoid_embed(ref, h / 2, cfg_.temperature);
        const Tensor query_pos = apply(p, ref_head2_, relu(apply(p, ref_head1_, sine)));

        const Tensor qk_in = tgt + query_pos;
        const Tensor self_attn =
            multi_head_attention({apply(p, d.sq, qk_in)}, {apply(p, d.sk, qk_in)}, apply(p, d.sv, tgt), cfg_.heads, mask);
        tgt = apply(p, d.n1, tgt + apply(p, d.so, self_attn));

        // Content and positional parts stay separate and are concatenated per head.
        const Tensor cross = multi_head_attention({apply(p, d.cq_content, tgt), apply(p, d.cq_pos, sine)},
                                                  {apply(p, d.ck_content, memory), apply(p, d.ck_pos, mem_pos)},
                                                  apply(p, d.cv, memory), cfg_.heads);
        tgt = apply(p, d.n2, tgt + apply(p, d.co, cross));
        tgt = apply(p, d.n3, tgt + ffn(p, d.f1, d.f2, tgt));

        const Tensor delta = apply(p, box_head2_, relu(apply(p, box_head1_, tgt)));
        const Tensor refined = ref_logit + delta;
        out.layers.push_back({sigmoid(refined), apply(p, cls_head_, tgt)});
        ref_logit = cfg_.detach_anchors ? detach(refined) : refined;
    }
    return out;
}

DecoderOutput DetectionTransformer::forward(const Binding& p, const ModelInput& input, const DenoisingBatch* dn) const {
    if (input.embeddings.rows() == 0) throw ShapeError("forward: empty token sequence");
    const Tensor memory = encode(p, project(p, input.embeddings), input.positions);
    return decode(p, memory, input.positions, dn);
}

Prediction DetectionTransformer::predict(const ModelInput& input, const DenoisingBatch* dn) const {
    const Binding frozen(params_, false);
    const DecoderOutput out = forward(frozen, input, dn);
    auto extract = [&](std::size_t layer) {
        LayerPrediction lp;
        const Tensor iv = out.learnable_intervals(layer);
        const Tensor lg = sigmoid(out.learnable_logits(layer));
        for (std::size_t q = 0; q < out.num_learnable; ++q) {
            lp.intervals.push_back({iv.at(q, 0), iv.at(q, 1)});
            lp.scores.push_back(lg.at(q, 0));
        }
        return lp;
    };
    Prediction pred;
    for (std::size_t l = 0; l + 1 < out.layers.size(); ++l) pred.aux.push_back(extract(l));
    auto last = extract(out.layers.size() - 1);
    pred.intervals = std::move(last.intervals);
    pred.scores = std::move(last.scores);
    return pred;
}

Tensor DecoderOutput::learnable_intervals(std::size_t layer) const {
    const auto& t = layers.at(layer).intervals;
    return num_denoising == 0 ? t : slice(t, 0, 0, num_learnable);
}

Tensor DecoderOutput::learnable_logits(std::size_t layer) const {
    const auto& t = layers.at(layer).logits;
    return num_denoising == 0 ? t : slice(t, 0, 0, num_learnable);
}

Tensor DecoderOutput::denoising_intervals(std::size_t layer) const {
    if (num_denoising == 0) throw std::logic_error("no denoising queries in this decoder output");
    return slice(layers.at(layer).intervals, 0, num_learnable, num_learnable + num_denoising);
}

}  // namespace spandet
