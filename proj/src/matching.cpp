#include "spandet/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace spandet {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) throw std::invalid_argument("CostMatrix: data size does not match dimensions");
}

namespace {

// Shortest augmenting path with potentials (Kuhn-Munkres / Jonker-Volgenant
// style). Assigns every one of the `gts` to a distinct prediction from
// `preds`; returns for each gt position the chosen index into preds.
std::vector<std::size_t> solve(const CostMatrix& cost, std::span<const std::size_t> preds,
                               std::span<const std::size_t> gts) {
    const std::size_t n = gts.size();
    const std::size_t m = preds.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost.at(preds[j - 1], gts[i0 - 1]) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> pick(n, 0);
    for (std::size_t j = 1; j <= m; ++j)
        if (p[j] != 0) pick[p[j] - 1] = preds[j - 1];
    return pick;
}

double solve_cost(const CostMatrix& cost, std::span<const std::size_t> preds, std::span<const std::size_t> gts) {
    if (gts.empty()) return 0.0;
    const auto pick = solve(cost, preds, gts);
    double total = 0.0;
    for (std::size_t k = 0; k < gts.size(); ++k) total += cost.at(pick[k], gts[k]);
    return total;
}

}  // namespace

Assignment hungarian(const CostMatrix& cost) {
    const std::size_t n = cost.rows(), m = cost.cols();
    if (m > n)
        throw std::invalid_argument("hungarian: " + std::to_string(m) + " targets exceed " + std::to_string(n) + " predictions");
    double scale = 1.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (!std::isfinite(cost.at(i, j))) throw std::invalid_argument("hungarian: non-finite cost entry");
            scale = std::max(scale, std::abs(cost.at(i, j)));
        }
    Assignment out;
    if (m == 0) return out;

    std::vector<std::size_t> all_preds(n), gts(m);
    for (std::size_t i = 0; i < n; ++i) all_preds[i] = i;
    for (std::size_t j = 0; j < m; ++j) gts[j] = j;
    double remaining_opt = solve_cost(cost, all_preds, gts);
    const double tol = 1e-12 * scale * static_cast<double>(m);

    // Walk predictions in order and give each the smallest gt that still
    // admits an optimal completion; this yields the lexicographically
    // smallest optimal pair sequence.
    for (std::size_t i = 0; i < n && !gts.empty(); ++i) {
        std::vector<std::size_t> rest(all_preds.begin() + static_cast<std::ptrdiff_t>(i) + 1, all_preds.end());
        for (std::size_t k = 0; k < gts.size(); ++k) {
            std::vector<std::size_t> others = gts;
            others.erase(others.begin() + static_cast<std::ptrdiff_t>(k));
            if (rest.size() < others.size()) continue;
            const double with = cost.at(i, gts[k]) + solve_cost(cost, rest, others);
            if (with <= remaining_opt + tol) {
                out.pairs.emplace_back(i, gts[k]);
                remaining_opt -= cost.at(i, gts[k]);
                gts = std::move(others);
                break;
            }
        }
    }
    for (const auto& [i, j] : out.pairs) out.cost += cost.at(i, j);
    return out;
}

CostMatrix build_match_cost(std::span<const ScoredInterval> preds, std::span<const Interval> gts, const MatchWeights& weights) {
    CostMatrix cost(preds.size(), gts.size());
    for (std::size_t i = 0; i < preds.size(); ++i)
        for (std::size_t j = 0; j < gts.size(); ++j)
            cost.at(i, j) = weights.span * span_l1(preds[i].interval, gts[j]) - weights.giou * giou_1d(preds[i].interval, gts[j]) -
                            weights.cls * preds[i].score;
    return cost;
}

}  // namespace spandet
