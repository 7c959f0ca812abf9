#include "spandet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spandet {

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
    return grad_check([&f](const std::vector<Tensor>& xs) { return f(xs[0]); }, std::vector<Tensor>{x}, eps);
}

double grad_check(const ScalarFnN& f, const std::vector<Tensor>& xs, double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");

    std::vector<Tensor> leaves;
    leaves.reserve(xs.size());
    for (const auto& x : xs) leaves.push_back(Tensor::from(x.shape(), x.to_vector(), true));
    backward(f(leaves));

    std::vector<std::vector<double>> base;
    for (const auto& x : xs) base.push_back(x.to_vector());
    auto eval_at = [&](std::size_t which, std::size_t i, double delta) {
        std::vector<Tensor> probe;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            auto v = base[k];
            if (k == which) v[i] += delta;
            probe.push_back(Tensor::from(xs[k].shape(), std::move(v), false));
        }
        return f(probe).item();
    };

    double worst = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        auto g = leaves[k].grad();
        for (std::size_t i = 0; i < base[k].size(); ++i) {
            const double analytic = g.empty() ? 0.0 : g[i];
            const double numeric = (eval_at(k, i, eps) - eval_at(k, i, -eps)) / (2.0 * eps);
            worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)));
        }
    }
    return worst;
}

}  // namespace spandet
