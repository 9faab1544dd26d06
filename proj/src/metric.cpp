#include "pfd/metric.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pfd/parallel.hpp"

namespace pfd {

namespace {
constexpr std::uint64_t kTagNoise = 0x6e6f697365ull;
}

Descriptor Descriptor::linear(Matrix projection) {
    if (projection.rows() < 1 || projection.cols() < 1) {
        throw std::invalid_argument("Descriptor::linear: empty projection");
    }
    Descriptor d;
    d.matrix_ = std::move(projection);
    return d;
}

const Matrix& Descriptor::matrix() const {
    if (!matrix_) throw std::logic_error("Descriptor::matrix: identity descriptor");
    return *matrix_;
}

Vector Descriptor::apply(const Vector& x) const {
    if (!matrix_) return x;
    if (x.size() != matrix_->cols()) {
        throw std::invalid_argument("Descriptor::apply: dimension mismatch");
    }
    return *matrix_ * x;
}

int Descriptor::output_dimension(int input_dim) const {
    if (!matrix_) return input_dim;
    if (input_dim != matrix_->cols()) {
        throw std::invalid_argument("Descriptor::output_dimension: dimension mismatch");
    }
    return static_cast<int>(matrix_->rows());
}

CoupledNoiseSet::CoupledNoiseSet(std::uint64_t seed, int count, int dim, double sigma_max)
    : seed_(seed),
      count_(count),
      dim_(dim),
      sigma_max_(sigma_max),
      stream_(rng::Stream(seed).child(kTagNoise)) {
    if (count_ < 1) throw std::invalid_argument("CoupledNoiseSet: count must be >= 1");
    if (dim_ < 1) throw std::invalid_argument("CoupledNoiseSet: dim must be >= 1");
    if (!(sigma_max_ > 0.0)) throw std::invalid_argument("CoupledNoiseSet: sigma_max must be > 0");
}

Vector CoupledNoiseSet::point(int i) const {
    if (i < 0 || i >= count_) throw std::out_of_range("CoupledNoiseSet::point");
    return sigma_max_ * stream_.standard_normal(static_cast<std::uint64_t>(i), dim_);
}

void LipschitzProfile::validate() const {
    if (!(lipschitz > 0.0) || !(score_gap > 0.0) || !(tail_bound > 0.0) || !(tail_time > 0.0)) {
        throw std::invalid_argument("LipschitzProfile: all constants must be > 0");
    }
}

PFDEstimate estimate_pfd(const DistributionSpec& p, const DistributionSpec& q,
                         const CoupledNoiseSet& noise, const SolverConfig& cfg,
                         const Descriptor& descriptor, const EstimateOptions& options) {
    const int d = dimension(p);
    if (dimension(q) != d) throw std::invalid_argument("estimate_pfd: dimension mismatch");
    if (noise.dimension() != d) {
        throw std::invalid_argument("estimate_pfd: noise dimension mismatch");
    }
    descriptor.output_dimension(d);  // dimension check up front

    const int m = noise.count();
    std::vector<double> sq(m);
    parallel_for(
        static_cast<std::size_t>(m),
        [&](std::size_t i) {
            const Vector x_t = noise.point(static_cast<int>(i));
            try {
                const Vector a = descriptor.apply(integrate_flow(p, x_t, cfg).x0);
                const Vector b = descriptor.apply(integrate_flow(q, x_t, cfg).x0);
                sq[i] = (a - b).squaredNorm();
            } catch (const DivergenceError& e) {
                throw DivergenceError(e.step_index, static_cast<long long>(i));
            }
        },
        options.threads);

    double mean = 0.0;
    for (int i = 0; i < m; ++i) mean += sq[i];
    mean /= m;

    PFDEstimate est;
    est.value = std::sqrt(mean);
    est.squared_distances = std::move(sq);
    est.samples = m;
    est.seed = noise.seed();
    est.solver_fingerprint = cfg.fingerprint();
    if (options.profile) {
        options.profile->validate();
        est.concentration_halfwidth =
            hoeffding_halfwidth(gronwall_gap_bound(*options.profile), m, options.eta);
    }
    return est;
}

double closed_form_gaussian_pfd(const GaussianSpec& p, const GaussianSpec& q) {
    if (p.dimension() != q.dimension()) {
        throw std::invalid_argument("closed_form_gaussian_pfd: dimension mismatch");
    }
    const double mean_term = (p.mean() - q.mean()).squaredNorm();
    const double cov_term = (p.sqrt_covariance() - q.sqrt_covariance()).squaredNorm();
    return std::sqrt(mean_term + cov_term);
}

double gronwall_gap_bound(const LipschitzProfile& profile) {
    profile.validate();
    const double exponent = 0.5 * profile.lipschitz * profile.tail_time * profile.tail_time;
    // expm1 keeps the (eps / L)(e^x - 1) term accurate as L -> 0.
    return std::exp(exponent) * profile.tail_bound +
           (profile.score_gap / profile.lipschitz) * std::expm1(exponent);
}

long long sample_size_bound(const LipschitzProfile& profile, double gamma, double eta) {
    if (!(gamma > 0.0)) throw std::invalid_argument("sample_size_bound: gamma must be > 0");
    if (!(eta > 0.0) || !(eta < 1.0)) {
        throw std::invalid_argument("sample_size_bound: eta must lie in (0, 1)");
    }
    const double kappa = gronwall_gap_bound(profile);
    const double raw =
        std::pow(kappa, 4) / (2.0 * std::pow(gamma, 4)) * std::log(2.0 / eta);
    if (!std::isfinite(raw) || raw >= 9.0e18) {
        throw std::overflow_error("sample_size_bound: required M does not fit an integer");
    }
    return std::max<long long>(1, static_cast<long long>(std::ceil(raw)));
}

double hoeffding_halfwidth(double kappa, int samples, double eta) {
    if (!(kappa > 0.0) || samples < 1 || !(eta > 0.0) || !(eta < 1.0)) {
        throw std::invalid_argument("hoeffding_halfwidth: bad arguments");
    }
    return kappa * std::pow(std::log(1.0 / eta) / (2.0 * samples), 0.25);
}

}  // namespace pfd
