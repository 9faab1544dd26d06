#include "pfd/flow.hpp"

#include <cmath>
#include <cstdio>

namespace pfd {

TimeGrid build_time_grid(double sigma_max, double sigma_min, int steps, double rho) {
    if (!(sigma_max > sigma_min) || !(sigma_min > 0.0)) {
        throw std::invalid_argument("build_time_grid: need sigma_max > sigma_min > 0");
    }
    if (steps < 1) throw std::invalid_argument("build_time_grid: need steps >= 1");
    if (!(rho >= 1.0)) throw std::invalid_argument("build_time_grid: need rho >= 1");

    TimeGrid grid;
    grid.sigma_max = sigma_max;
    grid.sigma_min = sigma_min;
    grid.rho = rho;
    grid.steps = steps;
    grid.nodes.resize(steps + 1);
    const double inv_max = std::pow(sigma_max, 1.0 / rho);
    const double inv_min = std::pow(sigma_min, 1.0 / rho);
    for (int i = 1; i < steps; ++i) {
        const double frac = double(i) / double(steps);
        grid.nodes[i] = std::pow(inv_max + frac * (inv_min - inv_max), rho);
    }
    // Pin the endpoints exactly so floor checks and fingerprints are stable.
    grid.nodes[0] = sigma_max;
    grid.nodes[steps] = sigma_min;
    return grid;
}

SolverConfig SolverConfig::defaults() {
    SolverConfig cfg;
    cfg.method = SolverMethod::kHeun2;
    cfg.grid = build_time_grid(80.0, 0.002, 18, 7.0);
    return cfg;
}

std::string SolverConfig::fingerprint() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s:steps=%d:sigma_max=%g:sigma_min=%g:rho=%g",
                  method == SolverMethod::kHeun2 ? "heun2" : "euler", grid.steps,
                  grid.sigma_max, grid.sigma_min, grid.rho);
    return buf;
}

DivergenceError::DivergenceError(int step, long long sample)
    : std::runtime_error("flow solve produced a non-finite state at step " +
                         std::to_string(step) +
                         (sample >= 0 ? " (sample " + std::to_string(sample) + ")" : "")),
      step_index(step),
      sample_index(sample) {}

FlowMapResult integrate_flow(const ScoreFn& score, const Vector& x_T, const SolverConfig& cfg) {
    const auto& ts = cfg.grid.nodes;
    const int n = cfg.grid.steps;
    if (static_cast<int>(ts.size()) != n + 1) {
        throw std::invalid_argument("integrate_flow: grid nodes inconsistent with step count");
    }
    for (int i = 0; i < n; ++i) {
        if (!(ts[i] > ts[i + 1])) {
            throw std::invalid_argument("integrate_flow: grid must be strictly decreasing");
        }
    }

    Vector x = x_T;
    int evals = 0;
    for (int i = 0; i < n; ++i) {
        const double t0 = ts[i];
        const double t1 = ts[i + 1];
        const double h = t1 - t0;
        const Vector d0 = -t0 * score(x, t0);
        ++evals;
        const bool correct = cfg.method == SolverMethod::kHeun2 && i < n - 1 && t1 > 0.0;
        if (correct) {
            const Vector x_pred = x + h * d0;
            const Vector d1 = -t1 * score(x_pred, t1);
            ++evals;
            x += 0.5 * h * (d0 + d1);
        } else {
            x += h * d0;
        }
        if (!x.allFinite()) throw DivergenceError(i);
    }
    return FlowMapResult{std::move(x), evals, cfg.grid};
}

FlowMapResult integrate_flow(const DistributionSpec& spec, const Vector& x_T,
                             const SolverConfig& cfg) {
    return std::visit(
        [&](const auto& s) {
            return integrate_flow([&s](const Vector& x, double t) { return s.score(x, t); }, x_T,
                                  cfg);
        },
        spec);
}

Vector analytic_gaussian_flow(const GaussianSpec& spec, const Vector& x_T, double sigma_max,
                              double t_end) {
    if (!(sigma_max >= t_end) || !(t_end >= 0.0) || !(sigma_max > 0.0)) {
        throw std::invalid_argument("analytic_gaussian_flow: need sigma_max >= t_end >= 0");
    }
    if (x_T.size() != spec.dimension()) {
        throw std::invalid_argument("analytic_gaussian_flow: dimension mismatch");
    }
    if (t_end == sigma_max) return x_T;  // identity at the start time
    const Eigen::ArrayXd lam = spec.eigenvalues().array();
    const Eigen::ArrayXd scale =
        ((lam + t_end * t_end) / (lam + sigma_max * sigma_max)).sqrt();
    const Vector rot = spec.eigenvectors().transpose() * (x_T - spec.mean());
    return spec.mean() + spec.eigenvectors() * (scale * rot.array()).matrix();
}

}  // namespace pfd
