#pragma once

// Dense tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto a graph node. Operations that touch a
// tensor with requires_grad() record themselves on the node so that
// backward() can replay them in reverse topological order. Leaves created
// with Tensor::view() share their value buffer with the caller, which is
// how a frozen parameter store is bound into several independent graphs.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spandet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node {
    Shape shape;
    std::shared_ptr<std::vector<double>> value;
    std::vector<double> grad;  // empty until touched by backward
    bool requires_grad = false;
    bool consumed = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads this node's grad and accumulates into the inputs' grads.
    std::function<void(Node&)> backward;

    std::span<double> ensure_grad();
};

}  // namespace detail

class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    // Leaf sharing an existing buffer; writes to the buffer are visible.
    static Tensor view(Shape shape, std::shared_ptr<std::vector<double>> storage, bool requires_grad);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const;
    // 2-D view: last axis is columns, everything before it is folded into rows.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    std::vector<double> to_vector() const;
    double item() const;
    double at(std::size_t r, std::size_t c) const;

    bool requires_grad() const;
    bool is_leaf() const;
    // Gradient of a leaf after backward(); empty span when none was materialized.
    std::span<const double> grad() const;
    bool has_grad() const;
    void zero_grad();

    std::shared_ptr<detail::Node> node() const { return node_; }

    // Internal constructor used by ops.
    static Tensor make_result(Shape shape, std::vector<double> values, const char* op,
                              std::vector<Tensor> const& inputs, std::function<void(detail::Node&)> backward);

  private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;
};

/// Reverse-topological record of every node reachable from a scalar loss.
/// A tape can be replayed once; the graph is released afterwards.
class Tape {
  public:
    explicit Tape(const Tensor& loss);

    std::size_t size() const { return order_.size(); }
    void backward();

  private:
    Tensor loss_;
    std::vector<std::shared_ptr<detail::Node>> order_;  // topological, loss last
    bool replayed_ = false;
};

/// Populates grad() on every requires_grad leaf reachable from loss.
void backward(const Tensor& loss);

}  // namespace spandet
