#include "pfd/baselines.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pfd/parallel.hpp"

namespace pfd {

namespace {

// Trace of the PSD square root of a symmetric PSD matrix; negative
// eigenvalues from roundoff are clamped to zero.
double trace_sqrt_psd(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (m + m.transpose()));
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("trace_sqrt_psd: eigendecomposition failed");
    }
    return solver.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

double log_sum_exp_row(const double* begin, int n) {
    double max_val = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) max_val = std::max(max_val, begin[i]);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::exp(begin[i] - max_val);
    return max_val + std::log(acc);
}

W2SampleResult entropic_w2(const std::vector<double>& cost, int n, const W2SampleConfig& cfg) {
    if (!(cfg.epsilon_reg > 0.0)) throw std::invalid_argument("sample_w2: epsilon_reg must be > 0");
    if (cfg.max_iterations < 1) {
        throw std::invalid_argument("sample_w2: max_iterations must be >= 1");
    }
    const double eps = cfg.epsilon_reg;
    const double log_marginal = -std::log(double(n));
    std::vector<double> f(n, 0.0), g(n, 0.0), buf(n);

    const double marginal_tol = cfg.marginal_tol;
    bool converged = false;
    int iter = 0;
    for (; iter < cfg.max_iterations; ++iter) {
        // f-update: rows, then g-update: columns, both in log space.
        for (int i = 0; i < n; ++i) {
            const double* row = cost.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) buf[j] = log_marginal + (g[j] - row[j]) / eps;
            f[i] = -eps * log_sum_exp_row(buf.data(), n);
        }
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                buf[i] = log_marginal + (f[i] - cost[static_cast<std::size_t>(i) * n + j]) / eps;
            }
            g[j] = -eps * log_sum_exp_row(buf.data(), n);
        }
        // Row marginals are exact right after the f-update; check columns.
        double err = 0.0;
        for (int i = 0; i < n; ++i) {
            const double* row = cost.data() + static_cast<std::size_t>(i) * n;
            double row_sum = 0.0;
            for (int j = 0; j < n; ++j) {
                row_sum += std::exp((f[i] + g[j] - row[j]) / eps + 2.0 * log_marginal);
            }
            err += std::abs(row_sum - 1.0 / n);
        }
        if (err < marginal_tol) {
            converged = true;
            ++iter;
            break;
        }
    }

    double transport_cost = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* row = cost.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            transport_cost +=
                std::exp((f[i] + g[j] - row[j]) / eps + 2.0 * log_marginal) * row[j];
        }
    }

    W2SampleResult result;
    result.value = std::sqrt(std::max(0.0, transport_cost));
    result.method = W2Method::kEntropic;
    result.converged = converged;
    result.iterations = iter;
    return result;
}

}  // namespace

double gaussian_w2(const GaussianSpec& p, const GaussianSpec& q) {
    if (p.dimension() != q.dimension()) {
        throw std::invalid_argument("gaussian_w2: dimension mismatch");
    }
    const Matrix sqrt_p = p.sqrt_covariance();
    const double cross = trace_sqrt_psd(sqrt_p * q.covariance() * sqrt_p);
    const double sq = (p.mean() - q.mean()).squaredNorm() + p.covariance().trace() +
                      q.covariance().trace() - 2.0 * cross;
    return std::sqrt(std::max(0.0, sq));
}

double gaussian_kl(const GaussianSpec& p, const GaussianSpec& q) {
    const int d = p.dimension();
    if (q.dimension() != d) throw std::invalid_argument("gaussian_kl: dimension mismatch");
    if (q.eigenvalues().minCoeff() <= 0.0) {
        throw std::invalid_argument("gaussian_kl: q must be nondegenerate");
    }
    if (p.eigenvalues().minCoeff() <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    const Matrix& uq = q.eigenvectors();
    const Eigen::ArrayXd lam_q = q.eigenvalues().array();
    const Matrix w = uq.transpose() * p.covariance() * uq;
    const double trace_term = (w.diagonal().array() / lam_q).sum();
    const Vector dm = uq.transpose() * (q.mean() - p.mean());
    const double quad = (dm.array().square() / lam_q).sum();
    const double logdet =
        lam_q.log().sum() - p.eigenvalues().array().log().sum();
    return 0.5 * (trace_term + quad - d + logdet);
}

W2SampleResult sample_w2(const Matrix& xs, const Matrix& ys, const W2SampleConfig& cfg) {
    const int n = static_cast<int>(xs.rows());
    if (n < 1) throw std::invalid_argument("sample_w2: empty sample");
    if (ys.rows() != n) throw std::invalid_argument("sample_w2: sample counts must match");
    if (ys.cols() != xs.cols()) throw std::invalid_argument("sample_w2: dimension mismatch");
    if (cfg.method == W2Method::kExactAssignment && n > W2SampleConfig::kExactCostGuard) {
        throw std::invalid_argument("sample_w2: exact assignment limited to " +
                                    std::to_string(W2SampleConfig::kExactCostGuard) + " samples");
    }

    std::vector<double> cost(static_cast<std::size_t>(n) * n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        double* row = cost.data() + i * n;
        for (int j = 0; j < n; ++j) {
            row[j] = (xs.row(i) - ys.row(j)).squaredNorm();
        }
    });

    if (cfg.method == W2Method::kEntropic) return entropic_w2(cost, n, cfg);

    std::vector<int> row_to_col;
    const double total = solve_assignment(n, cost, row_to_col);
    W2SampleResult result;
    result.value = std::sqrt(std::max(0.0, total / n));
    result.method = W2Method::kExactAssignment;
    result.converged = true;
    result.iterations = 0;
    return result;
}

}  // namespace pfd
