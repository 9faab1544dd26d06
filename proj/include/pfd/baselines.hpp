#pragma once

#include "pfd/distributions.hpp"

namespace pfd {

// Bures-Wasserstein closed form:
// (|mu_1 - mu_2|^2 + Tr(Sigma_1 + Sigma_2 - 2 (Sigma_1^{1/2} Sigma_2 Sigma_1^{1/2})^{1/2}))^{1/2}.
double gaussian_w2(const GaussianSpec& p, const GaussianSpec& q);

// KL(p || q) between Gaussians; q must be nondegenerate. Returns +inf for
// degenerate p.
double gaussian_kl(const GaussianSpec& p, const GaussianSpec& q);

enum class W2Method { kExactAssignment, kEntropic };

struct W2SampleConfig {
    W2Method method = W2Method::kExactAssignment;
    double epsilon_reg = 0.05;    // entropic only
    int max_iterations = 5000;    // entropic only
    double marginal_tol = 1e-7;   // entropic stopping rule (L1 marginal violation)
    int samples_per_side = 0;     // used by callers that draw the samples

    // Exact assignment cost grows cubically; refuse beyond this count.
    static constexpr int kExactCostGuard = 4096;
};

struct W2SampleResult {
    double value = 0.0;
    W2Method method = W2Method::kExactAssignment;
    bool converged = true;  // false when Sinkhorn hit max_iterations
    int iterations = 0;
};

// Empirical 2-Wasserstein distance between equally sized samples (rows).
// Exact: min-cost perfect matching under squared Euclidean cost, RMS-rooted.
// Entropic: log-domain Sinkhorn transport cost (no debiasing), RMS-rooted.
W2SampleResult sample_w2(const Matrix& xs, const Matrix& ys, const W2SampleConfig& cfg);

// Square min-cost assignment on a dense row-major cost matrix
// (Jonker-Volgenant shortest augmenting paths). Fills row_to_col and returns
// the total cost.
double solve_assignment(int n, const std::vector<double>& cost, std::vector<int>& row_to_col);

}  // namespace pfd
