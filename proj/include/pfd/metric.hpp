#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pfd/flow.hpp"

namespace pfd {

// Feature map applied to flow outputs before distances are taken. Identity or
// a fixed linear projection; always applied after the full solve.
class Descriptor {
public:
    static Descriptor identity() { return Descriptor(); }
    static Descriptor linear(Matrix projection);

    bool is_identity() const { return !matrix_.has_value(); }
    const Matrix& matrix() const;

    Vector apply(const Vector& x) const;
    int output_dimension(int input_dim) const;

private:
    Descriptor() = default;
    std::optional<Matrix> matrix_;
};

// Shared set of Gaussian noise starting points x_T^(i) ~ N(0, sigma_max^2 I).
// Point i depends only on (seed, i, dim, sigma_max); nothing is stored, so
// re-enumeration from any thread reproduces identical vectors.
class CoupledNoiseSet {
public:
    CoupledNoiseSet(std::uint64_t seed, int count, int dim, double sigma_max);

    Vector point(int i) const;

    std::uint64_t seed() const { return seed_; }
    int count() const { return count_; }
    int dimension() const { return dim_; }
    double sigma_max() const { return sigma_max_; }

private:
    std::uint64_t seed_;
    int count_;
    int dim_;
    double sigma_max_;
    rng::Stream stream_;
};

// Score-regularity constants asserted by the caller; never estimated here.
struct LipschitzProfile {
    double lipschitz;   // L
    double score_gap;   // epsilon, uniform score closeness
    double tail_bound;  // xi, trajectory gap beyond tail_time
    double tail_time;   // T_xi

    void validate() const;
};

struct PFDEstimate {
    double value = 0.0;
    std::vector<double> squared_distances;
    int samples = 0;
    std::uint64_t seed = 0;
    std::optional<double> concentration_halfwidth;
    std::string solver_fingerprint;
};

struct EstimateOptions {
    std::optional<LipschitzProfile> profile;  // enables the concentration halfwidth
    double eta = 0.05;                        // failure probability for the halfwidth
    unsigned threads = 0;                     // 0 = hardware concurrency
};

// Empirical probability flow distance: both flows are solved from the same
// x_T^(i) with the same grid and solver, the descriptor is applied post-hoc,
// and the root mean squared descriptor-space distance is returned. Squared
// distances are accumulated in sample order, so the result is independent of
// the thread count.
PFDEstimate estimate_pfd(const DistributionSpec& p, const DistributionSpec& q,
                         const CoupledNoiseSet& noise, const SolverConfig& cfg,
                         const Descriptor& descriptor = Descriptor::identity(),
                         const EstimateOptions& options = {});

// (|mu_1 - mu_2|^2 + |Sigma_1^{1/2} - Sigma_2^{1/2}|_F^2)^{1/2}.
double closed_form_gaussian_pfd(const GaussianSpec& p, const GaussianSpec& q);

// Uniform bound kappa(L, eps) = exp(L T_xi^2 / 2) xi + (eps / L)(exp(L T_xi^2 / 2) - 1)
// on the coupled flow-map gap; also the range constant of the concentration bound.
double gronwall_gap_bound(const LipschitzProfile& profile);

// Smallest M with ceil(kappa^4 / (2 gamma^4) * ln(2 / eta)) guaranteeing
// |estimate - true| <= gamma with probability >= 1 - eta.
long long sample_size_bound(const LipschitzProfile& profile, double gamma, double eta);

// One-sided Hoeffding halfwidth on the distance scale for a mean of M squared
// distances ranged in [0, kappa^2]: kappa * (ln(1/eta) / (2 M))^{1/4}.
double hoeffding_halfwidth(double kappa, int samples, double eta);

}  // namespace pfd
