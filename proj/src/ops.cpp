#include "spandet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spandet/kernels.hpp"

namespace spandet {

namespace {

using detail::Node;

std::span<const double> val(const Node& n) { return *n.value; }
std::span<const double> in_val(const Node& self, std::size_t i) { return *self.inputs[i]->value; }
bool in_grad(const Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }
std::span<double> in_g(Node& self, std::size_t i) { return self.inputs[i]->ensure_grad(); }

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

enum class Bcast { same, b_scalar, a_scalar, b_row };

Bcast classify(const char* op, const Tensor& a, const Tensor& b, bool allow_row) {
    if (a.shape() == b.shape()) return Bcast::same;
    if (b.size() == 1) return Bcast::b_scalar;
    if (a.size() == 1) return Bcast::a_scalar;
    if (allow_row && b.size() == a.cols() && b.cols() == a.cols() && b.rows() == 1) return Bcast::b_row;
    shape_fail(op, a, b);
}

template <class F, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, bool allow_row, F f, DA dfa, DB dfb) {
    const Bcast kind = classify(op, a, b, allow_row);
    const Shape out_shape = kind == Bcast::a_scalar ? b.shape() : a.shape();
    const std::size_t n = shape_size(out_shape);
    const std::size_t cols = out_shape.back();
    auto av = a.data();
    auto bv = b.data();
    auto ai = [kind](std::size_t i) { return kind == Bcast::a_scalar ? std::size_t{0} : i; };
    auto bi = [kind, cols](std::size_t i) {
        switch (kind) {
            case Bcast::b_scalar: return std::size_t{0};
            case Bcast::b_row: return i % cols;
            default: return i;
        }
    };
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[ai(i)], bv[bi(i)]);
    return Tensor::make_result(out_shape, std::move(out), op, {a, b}, [=](Node& self) {
        auto g = std::span<const double>(self.grad);
        auto x = in_val(self, 0);
        auto y = in_val(self, 1);
        if (in_grad(self, 0)) {
            auto ga = in_g(self, 0);
            for (std::size_t i = 0; i < n; ++i) ga[ai(i)] += g[i] * dfa(x[ai(i)], y[bi(i)]);
        }
        if (in_grad(self, 1)) {
            auto gb = in_g(self, 1);
            for (std::size_t i = 0; i < n; ++i) gb[bi(i)] += g[i] * dfb(x[ai(i)], y[bi(i)]);
        }
    });
}

template <class F, class DF>
Tensor unary(const char* op, const Tensor& a, F f, DF df) {
    auto av = a.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
    return Tensor::make_result(a.shape(), std::move(out), op, {a}, [=](Node& self) {
        auto g = std::span<const double>(self.grad);
        auto x = in_val(self, 0);
        auto y = val(self);
        auto ga = in_g(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
    });
}

std::size_t norm_axis(const char* op, const Tensor& a, int axis) {
    if (axis == -1) return 1;
    if (axis == 0 || axis == 1) return static_cast<std::size_t>(axis);
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " + shape_str(a.shape()));
}

Shape shape2(std::size_t r, std::size_t c) { return {r, c}; }

std::vector<double> transposed(std::span<const double> x, std::size_t rows, std::size_t cols) {
    std::vector<double> t(x.size());
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = x[i * cols + j];
    return t;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() > 2 || b.rank() > 2 || a.cols() != b.rows()) shape_fail("matmul", a, b);
    const kernels::GemmDims d{a.rows(), a.cols(), b.cols()};
    std::vector<double> out(d.m * d.n, 0.0);
    kernels::gemm_nn(a.data(), b.data(), out, d);
    return Tensor::make_result(shape2(d.m, d.n), std::move(out), "matmul", {a, b}, [d](Node& self) {
        auto g = std::span<const double>(self.grad);
        if (in_grad(self, 0))  // dA[m,k] += dC[m,n] * B[k,n]^T
            kernels::gemm_nt(g, in_val(self, 1), in_g(self, 0), {d.m, d.n, d.k});
        if (in_grad(self, 1))  // dB[k,n] += A[m,k]^T * dC[m,n]
            kernels::gemm_tn(in_val(self, 0), g, in_g(self, 1), {d.k, d.m, d.n});
    });
}

Tensor transpose(const Tensor& a) {
    if (a.rank() > 2) throw ShapeError("transpose: rank " + std::to_string(a.rank()) + " unsupported");
    const std::size_t r = a.rows(), c = a.cols();
    return Tensor::make_result(shape2(c, r), transposed(a.data(), r, c), "transpose", {a}, [r, c](Node& self) {
        auto ga = in_g(self, 0);
        auto g = self.grad;
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        "add", a, b, true, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        "sub", a, b, true, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        "mul", a, b, false, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary(
        "div", a, b, false, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor scale(const Tensor& a, double factor) {
    return unary(
        "scale", a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor shift(const Tensor& a, double offset) {
    return unary(
        "shift", a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const std::size_t ax = norm_axis("concat", parts[0], axis);
    for (const auto& p : parts)
        if (p.rank() > 2) throw ShapeError("concat: rank " + std::to_string(p.rank()) + " unsupported");
    std::vector<std::size_t> widths;
    std::size_t rows = 0, cols = 0;
    if (ax == 1) {
        rows = parts[0].rows();
        for (const auto& p : parts) {
            if (p.rows() != rows) shape_fail("concat", parts[0], p);
            widths.push_back(p.cols());
            cols += p.cols();
        }
        std::vector<double> out(rows * cols);
        std::size_t off = 0;
        for (const auto& p : parts) {
            auto pv = p.data();
            for (std::size_t i = 0; i < rows; ++i)
                std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(i * p.cols()), p.cols(),
                            out.begin() + static_cast<std::ptrdiff_t>(i * cols + off));
            off += p.cols();
        }
        return Tensor::make_result(shape2(rows, cols), std::move(out), "concat", parts, [rows, cols, widths](Node& self) {
            std::size_t o = 0;
            for (std::size_t k = 0; k < widths.size(); ++k) {
                if (in_grad(self, k)) {
                    auto gk = in_g(self, k);
                    for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < widths[k]; ++j) gk[i * widths[k] + j] += self.grad[i * cols + o + j];
                }
                o += widths[k];
            }
        });
    }
    cols = parts[0].cols();
    std::vector<double> out;
    for (const auto& p : parts) {
        if (p.cols() != cols) shape_fail("concat", parts[0], p);
        widths.push_back(p.size());
        rows += p.rows();
        out.insert(out.end(), p.data().begin(), p.data().end());
    }
    return Tensor::make_result(shape2(rows, cols), std::move(out), "concat", parts, [widths](Node& self) {
        std::size_t o = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            if (in_grad(self, k)) {
                auto gk = in_g(self, k);
                for (std::size_t j = 0; j < widths[k]; ++j) gk[j] += self.grad[o + j];
            }
            o += widths[k];
        }
    });
}

Tensor slice(const Tensor& a, int axis, std::size_t begin, std::size_t end) {
    const std::size_t ax = norm_axis("slice", a, axis);
    const std::size_t r = a.rows(), c = a.cols();
    const std::size_t limit = ax == 0 ? r : c;
    if (a.rank() > 2 || begin >= end || end > limit)
        throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for axis " +
                         std::to_string(ax) + " of shape " + shape_str(a.shape()));
    const std::size_t orow = ax == 0 ? end - begin : r;
    const std::size_t ocol = ax == 0 ? c : end - begin;
    const std::size_t r0 = ax == 0 ? begin : 0;
    const std::size_t c0 = ax == 0 ? 0 : begin;
    auto av = a.data();
    std::vector<double> out(orow * ocol);
    for (std::size_t i = 0; i < orow; ++i)
        for (std::size_t j = 0; j < ocol; ++j) out[i * ocol + j] = av[(i + r0) * c + (j + c0)];
    return Tensor::make_result(shape2(orow, ocol), std::move(out), "slice", {a}, [=](Node& self) {
        auto ga = in_g(self, 0);
        for (std::size_t i = 0; i < orow; ++i)
            for (std::size_t j = 0; j < ocol; ++j) ga[(i + r0) * c + (j + c0)] += self.grad[i * ocol + j];
    });
}

Tensor index_rows(const Tensor& a, const std::vector<std::size_t>& rows) {
    const std::size_t c = a.cols();
    if (rows.empty()) throw ShapeError("index_rows: empty index list");
    std::vector<double> out(rows.size() * c);
    auto av = a.data();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= a.rows())
            throw ShapeError("index_rows: row " + std::to_string(rows[i]) + " out of range for shape " + shape_str(a.shape()));
        std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(rows[i] * c), c, out.begin() + static_cast<std::ptrdiff_t>(i * c));
    }
    return Tensor::make_result(shape2(rows.size(), c), std::move(out), "index_rows", {a}, [rows, c](Node& self) {
        auto ga = in_g(self, 0);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < c; ++j) ga[rows[i] * c + j] += self.grad[i * c + j];
    });
}

Tensor softmax(const Tensor& a, int axis, const std::vector<std::uint8_t>& mask) {
    const std::size_t ax = norm_axis("softmax", a, axis);
    if (a.rank() > 2) throw ShapeError("softmax: rank " + std::to_string(a.rank()) + " unsupported");
    if (!mask.empty() && mask.size() != a.size())
        throw ShapeError("softmax: mask of " + std::to_string(mask.size()) + " entries for shape " + shape_str(a.shape()));
    // Work in row layout; axis 0 is handled by transposing in and out.
    const std::size_t r = ax == 1 ? a.rows() : a.cols();
    const std::size_t c = ax == 1 ? a.cols() : a.rows();
    std::vector<double> x = ax == 1 ? a.to_vector() : transposed(a.data(), a.rows(), a.cols());
    std::vector<std::uint8_t> m = mask;
    if (ax == 0 && !m.empty()) {
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < a.cols(); ++j) m[j * a.rows() + i] = mask[i * a.cols() + j];
    }
    std::vector<double> y(x.size());
    kernels::softmax_rows(x, m, y, r, c);
    std::vector<double> out = ax == 1 ? y : transposed(y, r, c);
    return Tensor::make_result(a.shape(), std::move(out), "softmax", {a}, [ax, r, c](Node& self) {
        auto yv = val(self);
        auto ga = in_g(self, 0);
        // index of element (i, j) of the row layout in storage
        auto idx = [&](std::size_t i, std::size_t j) { return ax == 1 ? i * c + j : j * r + i; };
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += yv[idx(i, j)] * self.grad[idx(i, j)];
            for (std::size_t j = 0; j < c; ++j) {
                const auto k = idx(i, j);
                ga[k] += yv[k] * (self.grad[k] - dot);
            }
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const std::size_t r = x.rows(), c = x.cols();
    if (gain.size() != c || bias.size() != c) shape_fail("layer_norm", x, gain.size() != c ? gain : bias);
    auto xv = x.data();
    auto gv = gain.data();
    auto bv = bias.data();
    std::vector<double> xhat(x.size()), inv_std(r), out(x.size());
    for (std::size_t i = 0; i < r; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += xv[i * c + j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = xv[i * c + j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(c);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j) {
            const auto k = i * c + j;
            xhat[k] = (xv[k] - mu) * inv_std[i];
            out[k] = xhat[k] * gv[j] + bv[j];
        }
    }
    return Tensor::make_result(x.shape(), std::move(out), "layer_norm", {x, gain, bias},
                               [r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                                   auto g = std::span<const double>(self.grad);
                                   auto gv = in_val(self, 1);
                                   if (in_grad(self, 0)) {
                                       auto gx = in_g(self, 0);
                                       const double inv_c = 1.0 / static_cast<double>(c);
                                       for (std::size_t i = 0; i < r; ++i) {
                                           double m1 = 0.0, m2 = 0.0;
                                           for (std::size_t j = 0; j < c; ++j) {
                                               const double dxh = g[i * c + j] * gv[j];
                                               m1 += dxh;
                                               m2 += dxh * xhat[i * c + j];
                                           }
                                           m1 *= inv_c;
                                           m2 *= inv_c;
                                           for (std::size_t j = 0; j < c; ++j) {
                                               const auto k = i * c + j;
                                               gx[k] += inv_std[i] * (g[k] * gv[j] - m1 - xhat[k] * m2);
                                           }
                                       }
                                   }
                                   if (in_grad(self, 1)) {
                                       auto gg = in_g(self, 1);
                                       for (std::size_t k = 0; k < g.size(); ++k) gg[k % c] += g[k] * xhat[k];
                                   }
                                   if (in_grad(self, 2)) {
                                       auto gb = in_g(self, 2);
                                       for (std::size_t k = 0; k < g.size(); ++k) gb[k % c] += g[k];
                                   }
                               });
}

Tensor relu(const Tensor& a) {
    return unary(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(
        "sigmoid", a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor inverse_sigmoid(const Tensor& a) {
    static constexpr double lo = 1e-6, hi = 1.0 - 1e-6;
    return unary(
        "inverse_sigmoid", a,
        [](double p) {
            const double q = std::clamp(p, lo, hi);
            return std::log(q / (1.0 - q));
        },
        [](double p, double) { return (p < lo || p > hi) ? 0.0 : 1.0 / (p * (1.0 - p)); });
}

Tensor exp(const Tensor& a) {
    return unary(
        "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    static constexpr double floor = 1e-12;
    return unary(
        "log", a, [](double x) { return std::log(std::max(x, floor)); },
        [](double x, double) { return x < floor ? 0.0 : 1.0 / x; });
}

Tensor abs(const Tensor& a) {
    return unary(
        "abs", a, [](double x) { return std::abs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

// Ties route the gradient to the first argument.
Tensor minimum(const Tensor& a, const Tensor& b) {
    return binary(
        "minimum", a, b, false, [](double x, double y) { return std::min(x, y); },
        [](double x, double y) { return x <= y ? 1.0 : 0.0; }, [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
    return binary(
        "maximum", a, b, false, [](double x, double y) { return std::max(x, y); },
        [](double x, double y) { return x >= y ? 1.0 : 0.0; }, [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

Tensor pow_scalar(const Tensor& a, double p) {
    return unary(
        "pow", a, [p](double x) { return std::pow(x, p); },
        [p](double x, double) { return p == 0.0 ? 0.0 : p * std::pow(x, p - 1.0); });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return Tensor::make_result({1}, {s}, "sum", {a}, [](Node& self) {
        auto ga = in_g(self, 0);
        const double g = self.grad[0];
        for (auto& v : ga) v += g;
    });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor detach(const Tensor& a) { return Tensor::from(a.shape(), a.to_vector(), false); }

Tensor sinusoid_embed(const Tensor& x, std::size_t dim, double temperature) {
    if (dim == 0 || dim % 2 != 0) throw ShapeError("sinusoid_embed: dim must be even and positive, got " + std::to_string(dim));
    const std::size_t k = x.rows(), m = x.cols();
    const std::size_t width = m * dim;
    std::vector<double> freq(dim / 2);
    for (std::size_t i = 0; i < dim / 2; ++i)
        freq[i] = 2.0 * std::numbers::pi / std::pow(temperature, 2.0 * static_cast<double>(i) / static_cast<double>(dim));
    auto xv = x.data();
    std::vector<double> out(k * width);
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t col = 0; col < m; ++col) {
            const double p = xv[r * m + col];
            double* o = out.data() + r * width + col * dim;
            for (std::size_t i = 0; i < dim / 2; ++i) {
                o[2 * i] = std::sin(p * freq[i]);
                o[2 * i + 1] = std::cos(p * freq[i]);
            }
        }
    return Tensor::make_result(shape2(k, width), std::move(out), "sinusoid_embed", {x}, [=](Node& self) {
        auto gx = in_g(self, 0);
        auto y = val(self);
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t col = 0; col < m; ++col) {
                const std::size_t base = r * width + col * dim;
                double acc = 0.0;
                for (std::size_t i = 0; i < dim / 2; ++i) {
                    // d sin(pf)/dp = f cos(pf); d cos(pf)/dp = -f sin(pf)
                    acc += self.grad[base + 2 * i] * freq[i] * y[base + 2 * i + 1];
                    acc -= self.grad[base + 2 * i + 1] * freq[i] * y[base + 2 * i];
                }
                gx[r * m + col] += acc;
            }
    });
}

}  // namespace spandet
