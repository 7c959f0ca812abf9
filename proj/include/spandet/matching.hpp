#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "spandet/geometry.hpp"

namespace spandet {

/// Rows are predictions, columns are ground-truth intervals.
class CostMatrix {
  public:
    CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
};

struct Assignment {
    // (prediction index, ground-truth index), sorted by prediction index.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    double cost = 0.0;
};

/// Minimum-cost injective assignment covering every column. Among optimal
/// assignments the one whose pair sequence is lexicographically smallest is
/// returned. Throws std::invalid_argument when cols > rows or on non-finite
/// entries.
Assignment hungarian(const CostMatrix& cost);

struct MatchWeights {
    double span = 10.0;
    double giou = 1.0;
    double cls = 4.0;
};

struct ScoredInterval {
    Interval interval;
    double score = 0.0;  // foreground probability
};

/// entry(i, j) = span * L1 - giou * gIoU - cls * p_i.
CostMatrix build_match_cost(std::span<const ScoredInterval> preds, std::span<const Interval> gts,
                            const MatchWeights& weights = {});

}  // namespace spandet
