#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "spandet/tensor.hpp"

namespace spandet {

struct Parameter {
    std::string name;
    Shape shape;
    std::shared_ptr<std::vector<double>> value;
};

/// Named, ordered collection of trainable arrays. Copying a store copies
/// the handles, not the values; use clone() for an independent copy.
class ParameterStore {
  public:
    std::size_t add(std::string name, Shape shape, std::vector<double> init);
    std::size_t add_zeros(std::string name, Shape shape);
    std::size_t add_constant(std::string name, Shape shape, double value);
    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) as in torch.nn.Linear.
    std::size_t add_uniform(std::string name, Shape shape, double bound, std::mt19937_64& rng);

    std::size_t size() const { return params_.size(); }
    const Parameter& operator[](std::size_t i) const { return params_[i]; }
    Parameter& operator[](std::size_t i) { return params_[i]; }
    std::size_t index_of(const std::string& name) const;
    std::size_t total_values() const;

    ParameterStore clone() const;

    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

  private:
    std::vector<Parameter> params_;
};

/// Leaves for one forward pass. Each binding owns fresh leaf nodes that
/// share the store's value buffers, so several bindings can run
/// concurrently and collect their own gradients.
class Binding {
  public:
    Binding(const ParameterStore& store, bool requires_grad);

    const Tensor& operator[](std::size_t i) const { return leaves_[i]; }
    std::size_t size() const { return leaves_.size(); }

    /// Flattened gradients in store order (zeros where none flowed).
    std::vector<std::vector<double>> gradients() const;

  private:
    std::vector<Tensor> leaves_;
};

}  // namespace spandet
