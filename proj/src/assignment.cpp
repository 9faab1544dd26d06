#include <limits>
#include <stdexcept>
#include <vector>

#include "pfd/baselines.hpp"

namespace pfd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One Dijkstra-style search for an augmenting path starting at `row`,
// following Crouse's variant of the Jonker-Volgenant algorithm. Returns the
// sink column, updates the dual potentials u/v and writes the predecessor of
// each scanned column into path.
int augmenting_path(int n, const std::vector<double>& cost, std::vector<double>& u,
                    std::vector<double>& v, std::vector<int>& path,
                    const std::vector<int>& row_for_col, std::vector<double>& shortest,
                    std::vector<bool>& scanned_rows, std::vector<bool>& scanned_cols,
                    std::vector<int>& remaining, int row, double& min_val) {
    int num_remaining = n;
    for (int j = 0; j < n; ++j) {
        remaining[j] = j;
        shortest[j] = kInf;
        scanned_cols[j] = false;
        scanned_rows[j] = false;
    }

    min_val = 0.0;
    int sink = -1;
    int i = row;
    while (sink == -1) {
        scanned_rows[i] = true;
        int index = -1;
        double lowest = kInf;
        const double* cost_row = cost.data() + static_cast<std::size_t>(i) * n;
        const double base = min_val - u[i];
        for (int it = 0; it < num_remaining; ++it) {
            const int j = remaining[it];
            const double r = base + cost_row[j] - v[j];
            if (r < shortest[j]) {
                path[j] = i;
                shortest[j] = r;
            }
            if (shortest[j] < lowest || (shortest[j] == lowest && row_for_col[j] == -1)) {
                lowest = shortest[j];
                index = it;
            }
        }
        min_val = lowest;
        if (min_val == kInf) return -1;  // unreachable with finite costs

        const int j = remaining[index];
        if (row_for_col[j] == -1) {
            sink = j;
        } else {
            i = row_for_col[j];
        }
        scanned_cols[j] = true;
        remaining[index] = remaining[--num_remaining];
    }
    return sink;
}

}  // namespace

double solve_assignment(int n, const std::vector<double>& cost, std::vector<int>& row_to_col) {
    if (n < 1) throw std::invalid_argument("solve_assignment: n must be >= 1");
    if (cost.size() != static_cast<std::size_t>(n) * n) {
        throw std::invalid_argument("solve_assignment: cost matrix size mismatch");
    }
    for (double c : cost) {
        if (!std::isfinite(c)) throw std::invalid_argument("solve_assignment: non-finite cost");
    }

    std::vector<double> u(n, 0.0), v(n, 0.0), shortest(n);
    std::vector<int> path(n, -1), remaining(n);
    std::vector<int> col_for_row(n, -1), row_for_col(n, -1);
    std::vector<bool> scanned_rows(n), scanned_cols(n);

    for (int row = 0; row < n; ++row) {
        double min_val = 0.0;
        const int sink = augmenting_path(n, cost, u, v, path, row_for_col, shortest,
                                         scanned_rows, scanned_cols, remaining, row, min_val);
        if (sink < 0) throw std::runtime_error("solve_assignment: infeasible instance");

        u[row] += min_val;
        for (int i = 0; i < n; ++i) {
            if (scanned_rows[i] && i != row) u[i] += min_val - shortest[col_for_row[i]];
        }
        for (int j = 0; j < n; ++j) {
            if (scanned_cols[j]) v[j] -= min_val - shortest[j];
        }

        int j = sink;
        while (true) {
            const int i = path[j];
            row_for_col[j] = i;
            std::swap(col_for_row[i], j);
            if (i == row) break;
        }
    }

    row_to_col = col_for_row;
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost[static_cast<std::size_t>(i) * n + col_for_row[i]];
    return total;
}

}  // namespace pfd
