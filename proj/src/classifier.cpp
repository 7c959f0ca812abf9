#include "spandet/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "spandet/ops.hpp"
#include "spandet/optim.hpp"

namespace spandet {

ClassifierHead::ClassifierHead(ClassifierConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg_.classes < 2) throw std::invalid_argument("classifier needs at least two classes");
    std::mt19937_64 rng(seed);
    w1_ = params_.add_uniform("cls.fc1.weight", {cfg_.d_model, cfg_.hidden}, 1.0 / std::sqrt(static_cast<double>(cfg_.d_model)), rng);
    b1_ = params_.add_zeros("cls.fc1.bias", {1, cfg_.hidden});
    w2_ = params_.add_uniform("cls.fc2.weight", {cfg_.hidden, cfg_.classes}, 1.0 / std::sqrt(static_cast<double>(cfg_.hidden)), rng);
    b2_ = params_.add_zeros("cls.fc2.bias", {1, cfg_.classes});
}

Tensor ClassifierHead::logits(const Binding& p, const Tensor& embeddings) const {
    if (embeddings.cols() != cfg_.d_model)
        throw ShapeError("classify: expected width " + std::to_string(cfg_.d_model) + ", got " + shape_str(embeddings.shape()));
    const Tensor cls = slice(embeddings, 0, embeddings.rows() - 1, embeddings.rows());
    const Tensor hidden = relu(add(matmul(cls, p[w1_]), p[b1_]));
    return add(matmul(hidden, p[w2_]), p[b2_]);
}

std::vector<double> ClassifierHead::classify(const Tensor& embeddings) const {
    const Binding frozen(params_, false);
    return softmax(logits(frozen, embeddings), 1).to_vector();
}

std::vector<double> train_classifier(ClassifierHead& head, const std::vector<ClassifierSample>& data,
                                     const ClassifierTrainConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("train_classifier: empty dataset");
    AdamW opt(head.params(), {0.9, 0.999, 1e-8, cfg.weight_decay});
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t steps_per_epoch = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total = steps_per_epoch * cfg.epochs;
    std::vector<double> history;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            const std::size_t begin = s * cfg.batch_size;
            const std::size_t end = std::min(data.size(), begin + cfg.batch_size);
            Binding p(head.params(), true);
            Tensor loss;
            for (std::size_t i = begin; i < end; ++i) {
                const auto& sample = data[order[i]];
                const Tensor probs = softmax(head.logits(p, sample.embeddings), 1);
                const Tensor nll = scale(log(slice(probs, 1, sample.label, sample.label + 1)), -1.0);
                loss = loss.defined() ? loss + nll : nll;
            }
            loss = scale(loss, 1.0 / static_cast<double>(end - begin));
            epoch_loss += loss.item() * static_cast<double>(end - begin);
            backward(loss);
            opt.step(head.params(), p.gradients(), cosine_lr(epoch * steps_per_epoch + s, total, cfg.lr, 0));
        }
        history.push_back(epoch_loss / static_cast<double>(data.size()));
    }
    return history;
}

}  // namespace spandet
