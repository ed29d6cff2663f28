#pragma once

#include "pmbm/densities.hpp"

#include <span>
#include <vector>

namespace pmbm {

/// Minimum-cost assignment of rows to columns for a rectangular cost matrix. Every row is
/// assigned when rows <= cols, otherwise every column. Entry i is the column of row i or -1.
std::vector<int> min_cost_assignment(const Matrix& cost);

struct GospaConfig {
    double order = 2.0;   ///< p
    double cutoff = 10.0; ///< c
    double alpha = 2.0;

    void validate() const;
};

/// Components are p-th power sums; total = (localisation + missed + false)^(1/p).
struct GospaResult {
    double total = 0.0;
    double localisation = 0.0;
    double missed = 0.0;
    double false_targets = 0.0;
    int assigned = 0;
};

/// X estimated set, Y truth set.
GospaResult gospa(std::span<const Vector> estimates, std::span<const Vector> truth, const GospaConfig& cfg = {});

}  // namespace pmbm
