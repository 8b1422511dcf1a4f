#include <cmath>
#include <limits>

#include "ltc/error.hpp"
#include "ltc/evalkit.hpp"

namespace ltc {
namespace {

// Shortest augmenting path with potentials; requires rows <= cols.
// O(rows^2 * cols).
std::vector<int> solve_wide(const DenseMatrix& a) {
    const std::size_t n = a.rows();
    const std::size_t m = a.cols();
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
    std::vector<int> row_to_col(n, -1);
    for (std::size_t j = 1; j <= m; ++j) {
        if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
    }
    return row_to_col;
}

}  // namespace

HungarianResult hungarian(const DenseMatrix& cost) {
    if (cost.rows() == 0 || cost.cols() == 0) throw InvalidArgument("hungarian: empty cost matrix");
    if (!cost.all_finite()) throw InvalidArgument("hungarian: non-finite cost");
    HungarianResult r;
    if (cost.rows() <= cost.cols()) {
        r.row_to_col = solve_wide(cost);
    } else {
        DenseMatrix t(cost.cols(), cost.rows());
        for (std::size_t i = 0; i < cost.rows(); ++i) {
            for (std::size_t j = 0; j < cost.cols(); ++j) t(j, i) = cost(i, j);
        }
        const std::vector<int> col_to_row = solve_wide(t);
        r.row_to_col.assign(cost.rows(), -1);
        for (std::size_t j = 0; j < col_to_row.size(); ++j) {
            r.row_to_col[static_cast<std::size_t>(col_to_row[j])] = static_cast<int>(j);
        }
    }
    // Summed in row order from the original entries.
    for (std::size_t i = 0; i < r.row_to_col.size(); ++i) {
        if (r.row_to_col[i] >= 0) r.cost += cost(i, static_cast<std::size_t>(r.row_to_col[i]));
    }
    return r;
}

}  // namespace ltc
