#pragma once

#include <cstddef>
#include <vector>

#include "spandet/params.hpp"

namespace spandet {

using Gradients = std::vector<std::vector<double>>;

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

/// Adam with decoupled weight decay and bias-corrected moments.
class AdamW {
  public:
    AdamW(const ParameterStore& params, AdamWConfig cfg = {});

    void step(ParameterStore& params, const Gradients& grads, double lr);
    std::size_t steps() const { return t_; }
    const AdamWConfig& config() const { return cfg_; }

  private:
    AdamWConfig cfg_;
    Gradients m_;
    Gradients v_;
    std::size_t t_ = 0;
};

/// Linear warmup to base_lr over warmup_steps, then half-cosine decay to 0 at total_steps.
double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr, std::size_t warmup_steps);

/// Rescales grads in place so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(Gradients& grads, double max_norm);

}  // namespace spandet
