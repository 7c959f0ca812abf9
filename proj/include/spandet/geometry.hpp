#pragma once

// 1-D interval algebra. An Interval is (center, width) normalized by text
// length in characters; a CharSpan is the half-open character range [x1, x2).

#include <cstddef>
#include <ostream>

#include "spandet/tensor.hpp"

namespace spandet {

struct Interval {
    double c = 0.5;
    double w = 1.0;

    double lo() const { return c - 0.5 * w; }
    double hi() const { return c + 0.5 * w; }
    static Interval from_bounds(double lo, double hi) { return {0.5 * (lo + hi), hi - lo}; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

struct CharSpan {
    std::size_t x1 = 0;
    std::size_t x2 = 0;

    std::size_t length() const { return x2 - x1; }
    bool contains(std::size_t pos) const { return pos >= x1 && pos < x2; }

    friend bool operator==(const CharSpan&, const CharSpan&) = default;
    friend auto operator<=>(const CharSpan&, const CharSpan&) = default;
};

std::ostream& operator<<(std::ostream& os, const Interval& iv);
std::ostream& operator<<(std::ostream& os, const CharSpan& sp);

bool is_valid(const Interval& iv);
bool is_valid(const CharSpan& sp, std::size_t text_len);

/// Rounds half away from zero; the result is clamped to a non-empty span
/// inside [0, text_len]. Throws std::invalid_argument when text_len == 0.
CharSpan cw_to_span(const Interval& iv, std::size_t text_len);
Interval span_to_cw(const CharSpan& sp, std::size_t text_len);

double iou_1d(const Interval& a, const Interval& b);
double giou_1d(const Interval& a, const Interval& b);
double span_l1(const Interval& a, const Interval& b);

// Differentiable row-wise versions over [k, 2] tensors of (c, w); both
// return a [k, 1] column.
Tensor giou_1d(const Tensor& a, const Tensor& b);
Tensor span_l1(const Tensor& a, const Tensor& b);

}  // namespace spandet
