#include "spandet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spandet/ops.hpp"

namespace spandet {

std::ostream& operator<<(std::ostream& os, const Interval& iv) { return os << "(c=" << iv.c << ", w=" << iv.w << ")"; }
std::ostream& operator<<(std::ostream& os, const CharSpan& sp) { return os << "[" << sp.x1 << ", " << sp.x2 << ")"; }

bool is_valid(const Interval& iv) {
    return std::isfinite(iv.c) && std::isfinite(iv.w) && iv.c >= 0.0 && iv.c <= 1.0 && iv.w > 0.0 && iv.w <= 1.0;
}

bool is_valid(const CharSpan& sp, std::size_t text_len) { return sp.x1 < sp.x2 && sp.x2 <= text_len; }

CharSpan cw_to_span(const Interval& iv, std::size_t text_len) {
    if (text_len == 0) throw std::invalid_argument("cw_to_span: text length must be positive");
    const double len = static_cast<double>(text_len);
    const double r1 = std::round(iv.lo() * len);
    const double r2 = std::round(iv.hi() * len);
    const double x1 = std::clamp(r1, 0.0, len - 1.0);
    const double x2 = std::clamp(r2, x1 + 1.0, len);
    return {static_cast<std::size_t>(x1), static_cast<std::size_t>(x2)};
}

Interval span_to_cw(const CharSpan& sp, std::size_t text_len) {
    const double len = static_cast<double>(text_len);
    return {static_cast<double>(sp.x1 + sp.x2) / (2.0 * len), static_cast<double>(sp.x2 - sp.x1) / len};
}

// Everything comes from endpoints: union = hull - gap. On overlap the gap is
// exactly zero, so IoU <= 1 and gIoU == IoU hold bit for bit.
double iou_1d(const Interval& a, const Interval& b) {
    const double lo = std::max(a.lo(), b.lo()), hi = std::min(a.hi(), b.hi());
    const double hull = std::max(a.hi(), b.hi()) - std::min(a.lo(), b.lo());
    return std::max(0.0, hi - lo) / (hull - std::max(0.0, lo - hi));
}

double giou_1d(const Interval& a, const Interval& b) {
    const double lo = std::max(a.lo(), b.lo()), hi = std::min(a.hi(), b.hi());
    const double hull = std::max(a.hi(), b.hi()) - std::min(a.lo(), b.lo());
    const double gap = std::max(0.0, lo - hi);
    return std::max(0.0, hi - lo) / (hull - gap) - gap / hull;
}

double span_l1(const Interval& a, const Interval& b) { return std::abs(a.c - b.c) + std::abs(a.w - b.w); }

namespace {

void check_pair(const char* op, const Tensor& a, const Tensor& b) {
    if (a.cols() != 2 || a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": expected matching [k, 2] inputs, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
}

}  // namespace

Tensor giou_1d(const Tensor& a, const Tensor& b) {
    check_pair("giou_1d", a, b);
    const Tensor ca = slice(a, 1, 0, 1), wa = slice(a, 1, 1, 2);
    const Tensor cb = slice(b, 1, 0, 1), wb = slice(b, 1, 1, 2);
    const Tensor lo_a = ca - scale(wa, 0.5), hi_a = ca + scale(wa, 0.5);
    const Tensor lo_b = cb - scale(wb, 0.5), hi_b = cb + scale(wb, 0.5);
    const Tensor lo = maximum(lo_a, lo_b), hi = minimum(hi_a, hi_b);
    const Tensor hull = maximum(hi_a, hi_b) - minimum(lo_a, lo_b);
    const Tensor gap = relu(lo - hi);
    return relu(hi - lo) / (hull - gap) - gap / hull;
}

Tensor span_l1(const Tensor& a, const Tensor& b) {
    check_pair("span_l1", a, b);
    const Tensor d = abs(a - b);
    return slice(d, 1, 0, 1) + slice(d, 1, 1, 2);
}

}  // namespace spandet
