#pragma once

// Differentiable primitives. Broadcasting is limited to scalar-with-tensor
// and a row-vector bias added to every row; anything else is a ShapeError.

#include <cstdint>
#include <vector>

#include "spandet/tensor.hpp"

namespace spandet {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor shift(const Tensor& a, double offset);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, std::size_t begin, std::size_t end);
Tensor index_rows(const Tensor& a, const std::vector<std::size_t>& rows);

/// Numerically stable softmax along axis (0 or 1 / -1 for the last axis of a
/// 2-D view). mask, when non-empty, has one entry per element; nonzero entries
/// receive probability exactly 0 and no gradient.
Tensor softmax(const Tensor& a, int axis = -1, const std::vector<std::uint8_t>& mask = {});

/// Normalizes each row over the last axis, then applies gain and bias
/// (each of length cols()).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-9);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// log(p / (1 - p)) with p clamped to [1e-6, 1 - 1e-6]; zero gradient where clamped.
Tensor inverse_sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
/// Natural log with the argument clamped below at 1e-12.
Tensor log(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
/// a^p for a >= 0.
Tensor pow_scalar(const Tensor& a, double p);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Same values, cut from the graph.
Tensor detach(const Tensor& a);

/// Sine/cosine features for positions in [0, 1]. Each of the m columns of x
/// (shape [k, m]) expands into dim interleaved features [sin, cos, sin, ...]
/// over a geometric frequency ladder; output shape is [k, m * dim].
Tensor sinusoid_embed(const Tensor& x, std::size_t dim, double temperature = 10000.0);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

}  // namespace spandet
