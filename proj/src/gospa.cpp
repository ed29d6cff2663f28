#include "pmbm/gospa.hpp"

#include "pmbm/errors.hpp"

#include <cmath>
#include <limits>

namespace pmbm {

// Shortest augmenting path with row/column potentials, O(n^2 m).
std::vector<int> min_cost_assignment(const Matrix& cost) {
    const bool transpose = cost.rows() > cost.cols();
    const Matrix a = transpose ? Matrix(cost.transpose()) : cost;
    const auto n = static_cast<int>(a.rows());
    const auto m = static_cast<int>(a.cols());
    if (!a.allFinite()) throw ModelError("assignment costs must be finite");

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
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
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] != 0) row_to_col[static_cast<std::size_t>(p[j] - 1)] = j - 1;
    if (!transpose) return row_to_col;

    std::vector<int> out(static_cast<std::size_t>(cost.rows()), -1);
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(row_to_col[static_cast<std::size_t>(i)])] = i;
    return out;
}

void GospaConfig::validate() const {
    if (!(order >= 1.0)) throw ModelError("GOSPA order must be at least 1");
    if (!(cutoff > 0.0)) throw ModelError("GOSPA cutoff must be positive");
    if (alpha != 2.0) throw ModelError("only the alpha = 2 GOSPA decomposition is supported");
}

GospaResult gospa(std::span<const Vector> estimates, std::span<const Vector> truth, const GospaConfig& cfg) {
    cfg.validate();
    const double p = cfg.order;
    const double cp = std::pow(cfg.cutoff, p);
    const auto nx = static_cast<Eigen::Index>(estimates.size());
    const auto ny = static_cast<Eigen::Index>(truth.size());

    GospaResult r;
    std::vector<int> assignment;
    Matrix dist(nx, ny);
    if (nx > 0 && ny > 0) {
        Matrix cost(nx, ny);
        for (Eigen::Index i = 0; i < nx; ++i)
            for (Eigen::Index j = 0; j < ny; ++j) {
                dist(i, j) = (estimates[static_cast<std::size_t>(i)] - truth[static_cast<std::size_t>(j)]).norm();
                cost(i, j) = std::pow(std::min(dist(i, j), cfg.cutoff), p);
            }
        assignment = min_cost_assignment(cost);
    }

    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(assignment.size()); ++i) {
        const int j = assignment[static_cast<std::size_t>(i)];
        if (j < 0 || dist(i, j) >= cfg.cutoff) continue;
        r.localisation += std::pow(dist(i, j), p);
        ++r.assigned;
    }
    r.missed = cp / 2.0 * static_cast<double>(ny - r.assigned);
    r.false_targets = cp / 2.0 * static_cast<double>(nx - r.assigned);
    r.total = std::pow(r.localisation + r.missed + r.false_targets, 1.0 / p);
    return r;
}

}  // namespace pmbm
