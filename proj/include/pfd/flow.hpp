#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfd/distributions.hpp"

namespace pfd {

// EDM noise schedule: zero drift, diffusion sqrt(2t), so the noise level at
// time t is sigma(t) = t and the backward probability-flow ODE reads
// dx = -t * score(x, t) dt.
struct NoiseSchedule {
    static double drift(double) { return 0.0; }
    static double diffusion(double t) { return std::sqrt(2.0 * t); }
    static double sigma(double t) { return t; }
};

// Strictly decreasing nodes t_0 = sigma_max > ... > t_n = sigma_min, warped by
// the exponent rho (rho = 7 concentrates nodes near sigma_min).
struct TimeGrid {
    double sigma_max = 80.0;
    double sigma_min = 0.002;
    double rho = 7.0;
    int steps = 18;
    std::vector<double> nodes;  // steps + 1 entries
};

TimeGrid build_time_grid(double sigma_max, double sigma_min, int steps, double rho);

enum class SolverMethod { kEuler, kHeun2 };

struct SolverConfig {
    SolverMethod method = SolverMethod::kHeun2;
    TimeGrid grid;

    static SolverConfig defaults();  // Heun2, 18 steps, sigma in [0.002, 80], rho 7

    // Compact description baked into estimates and result tables.
    std::string fingerprint() const;
};

struct FlowMapResult {
    Vector x0;
    int score_evaluations = 0;
    TimeGrid grid_used;
};

// Raised when a solve produces a non-finite state; carries the step index.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(int step, long long sample = -1);
    int step_index;
    long long sample_index;  // -1 when not raised inside a batched estimate
};

using ScoreFn = std::function<Vector(const Vector&, double)>;

// Integrates the backward PF-ODE from x_T at grid node 0 down to the last
// node. Heun2 applies the trapezoidal corrector on every step except the
// final one (and never on a step landing exactly at t = 0), matching the
// usual deterministic-sampler convention; the final step is plain Euler.
FlowMapResult integrate_flow(const ScoreFn& score, const Vector& x_T, const SolverConfig& cfg);
FlowMapResult integrate_flow(const DistributionSpec& spec, const Vector& x_T,
                             const SolverConfig& cfg);

// Exact solution of the Gaussian flow: mu + U diag(sqrt((lambda_k + t_end^2) /
// (lambda_k + sigma_max^2))) U^T (x_T - mu). Requires sigma_max >= t_end >= 0;
// t_end = sigma_max returns x_T unchanged.
Vector analytic_gaussian_flow(const GaussianSpec& spec, const Vector& x_T, double sigma_max,
                              double t_end);

}  // namespace pfd
