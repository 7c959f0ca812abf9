#include "spandet/params.hpp"

#include <stdexcept>

namespace spandet {

std::size_t ParameterStore::add(std::string name, Shape shape, std::vector<double> init) {
    if (shape_size(shape) != init.size()) throw ShapeError("parameter " + name + ": init size does not match " + shape_str(shape));
    for (const auto& p : params_)
        if (p.name == name) throw std::invalid_argument("duplicate parameter name " + name);
    params_.push_back({std::move(name), std::move(shape), std::make_shared<std::vector<double>>(std::move(init))});
    return params_.size() - 1;
}

std::size_t ParameterStore::add_zeros(std::string name, Shape shape) { return add_constant(std::move(name), std::move(shape), 0.0); }

std::size_t ParameterStore::add_constant(std::string name, Shape shape, double value) {
    const auto n = shape_size(shape);
    return add(std::move(name), std::move(shape), std::vector<double>(n, value));
}

std::size_t ParameterStore::add_uniform(std::string name, Shape shape, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = dist(rng);
    return add(std::move(name), std::move(shape), std::move(v));
}

std::size_t ParameterStore::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return i;
    throw std::out_of_range("no parameter named " + name);
}

std::size_t ParameterStore::total_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value->size();
    return n;
}

ParameterStore ParameterStore::clone() const {
    ParameterStore out;
    for (const auto& p : params_) out.params_.push_back({p.name, p.shape, std::make_shared<std::vector<double>>(*p.value)});
    return out;
}

Binding::Binding(const ParameterStore& store, bool requires_grad) {
    leaves_.reserve(store.size());
    for (const auto& p : store) leaves_.push_back(Tensor::view(p.shape, p.value, requires_grad));
}

std::vector<std::vector<double>> Binding::gradients() const {
    std::vector<std::vector<double>> out;
    out.reserve(leaves_.size());
    for (const auto& t : leaves_) {
        if (t.has_grad())
            out.emplace_back(t.grad().begin(), t.grad().end());
        else
            out.emplace_back(t.size(), 0.0);
    }
    return out;
}

}  // namespace spandet
