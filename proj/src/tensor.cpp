#include "spandet/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace spandet {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
    for (auto s : shape)
        if (s == 0) throw ShapeError("tensor shape " + shape_str(shape) + " has a zero-length axis");
}

}  // namespace

std::span<double> detail::Node::ensure_grad() {
    if (grad.empty()) grad.assign(value->size(), 0.0);
    return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    validate_shape(shape);
    const auto n = shape_size(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    validate_shape(shape);
    if (shape_size(shape) != values.size())
        throw ShapeError("shape " + shape_str(shape) + " needs " + std::to_string(shape_size(shape)) +
                         " values, got " + std::to_string(values.size()));
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::make_shared<std::vector<double>>(std::move(values));
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::view(Shape shape, std::shared_ptr<std::vector<double>> storage, bool requires_grad) {
    validate_shape(shape);
    if (!storage || storage->size() != shape_size(shape))
        throw ShapeError("view of shape " + shape_str(shape) + " over mismatched storage");
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(storage);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values, const char* op, std::vector<Tensor> const& inputs,
                           std::function<void(detail::Node&)> backward) {
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::make_shared<std::vector<double>>(std::move(values));
    node->op = op;
    const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (const auto& t : inputs) node->inputs.push_back(t.node_);
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->value->size(); }

std::size_t Tensor::cols() const { return node_->shape.back(); }
std::size_t Tensor::rows() const { return size() / cols(); }

std::span<const double> Tensor::data() const { return *node_->value; }
std::span<double> Tensor::mutable_data() { return *node_->value; }
std::vector<double> Tensor::to_vector() const { return *node_->value; }

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return (*node_->value)[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return (*node_->value)[r * cols() + c]; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->inputs.empty() && !node_->backward; }

std::span<const double> Tensor::grad() const { return node_->grad; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
void Tensor::zero_grad() { node_->grad.clear(); }

Tape::Tape(const Tensor& loss) : loss_(loss) {
    if (!loss.defined()) throw std::invalid_argument("backward on undefined tensor");
    if (loss.size() != 1) throw ShapeError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
    if (loss.node()->consumed) throw std::logic_error("tape already replayed for this loss");

    // Iterative post-order DFS; every node is emitted after all of its inputs.
    std::unordered_set<const detail::Node*> seen;
    std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
    if (loss.requires_grad()) stack.emplace_back(loss.node(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            auto child = node->inputs[next++];
            if (child->requires_grad && seen.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
            continue;
        }
        order_.push_back(node);
        stack.pop_back();
    }
}

void Tape::backward() {
    if (replayed_) throw std::logic_error("tape already replayed");
    replayed_ = true;
    loss_.node()->consumed = true;
    if (order_.empty()) return;
    order_.back()->ensure_grad()[0] += 1.0;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        auto& node = **it;
        if (node.backward) {
            if (!node.grad.empty()) node.backward(node);
            // Interior nodes are single-use: drop closures and buffers.
            node.backward = nullptr;
            node.inputs.clear();
            node.grad.clear();
            node.grad.shrink_to_fit();
            node.consumed = true;
        }
    }
}

void backward(const Tensor& loss) {
    Tape tape(loss);
    tape.backward();
}

}  // namespace spandet
