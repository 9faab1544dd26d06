#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <variant>
#include <vector>

#include "pfd/rng.hpp"

namespace pfd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Multivariate Gaussian N(mu, Sigma) with a cached eigendecomposition
// Sigma = U diag(lambda) U^T. Eigenvalues below 1e-12 * lambda_max are clamped
// to zero at construction, so Sigma + t^2 I stays invertible for every t > 0
// even for (near-)singular input. Immutable after construction.
class GaussianSpec {
public:
    GaussianSpec(Vector mean, Matrix covariance);

    int dimension() const { return static_cast<int>(mean_.size()); }
    const Vector& mean() const { return mean_; }
    const Matrix& covariance() const { return covariance_; }
    const Matrix& eigenvectors() const { return eigenvectors_; }
    const Vector& eigenvalues() const { return eigenvalues_; }

    // U diag(sqrt(lambda)) U^T, the symmetric PSD square root.
    Matrix sqrt_covariance() const;

    // Score of the noised density N(mu, Sigma + t^2 I):
    // (Sigma + t^2 I)^{-1} (mu - x), evaluated in the eigenbasis.
    Vector score(const Vector& x, double t) const;

    double log_noised_density(const Vector& x, double t) const;

    // mu + U diag(sqrt(lambda)) U^T z with z standard normal for (stream, index).
    Vector sample_one(const rng::Stream& stream, std::uint64_t index) const;

private:
    Vector mean_;
    Matrix covariance_;
    Matrix eigenvectors_;
    Vector eigenvalues_;
};

class GaussianMixtureSpec {
public:
    struct Component {
        double weight;
        GaussianSpec gaussian;
    };

    explicit GaussianMixtureSpec(std::vector<Component> components);

    int dimension() const { return components_.front().gaussian.dimension(); }
    const std::vector<Component>& components() const { return components_; }

    // Responsibility-weighted sum of per-component noised scores; the
    // responsibilities are softmaxed in log space.
    Vector score(const Vector& x, double t) const;

    double log_noised_density(const Vector& x, double t) const;

    Vector sample_one(const rng::Stream& stream, std::uint64_t index) const;

private:
    std::vector<Component> components_;
};

// Uniform mixture of Dirac atoms. The noised density is a mixture of
// N(y_i, t^2 I); its score is unbounded as t -> 0, so evaluations below
// score_floor are rejected and the caller must clamp its time grid.
class EmpiricalSpec {
public:
    static constexpr double kDefaultScoreFloor = 0.002;

    explicit EmpiricalSpec(Matrix atoms, double score_floor = kDefaultScoreFloor);

    int dimension() const { return static_cast<int>(atoms_.cols()); }
    int atom_count() const { return static_cast<int>(atoms_.rows()); }
    const Matrix& atoms() const { return atoms_; }
    double score_floor() const { return score_floor_; }

    // (sum_i w_i y_i - x) / t^2 with w = softmax_i(-|x - y_i|^2 / (2 t^2)).
    Vector score(const Vector& x, double t) const;

    // The softmax weights; exposed so tests can check they sum to one.
    Vector score_weights(const Vector& x, double t) const;

    double log_noised_density(const Vector& x, double t) const;

    Vector sample_one(const rng::Stream& stream, std::uint64_t index) const;

private:
    Matrix atoms_;  // one row per atom
    double score_floor_;
};

using DistributionSpec = std::variant<GaussianSpec, GaussianMixtureSpec, EmpiricalSpec>;

int dimension(const DistributionSpec& spec);
Vector score(const DistributionSpec& spec, const Vector& x, double t);
double log_noised_density(const DistributionSpec& spec, const Vector& x, double t);

// count i.i.d. draws (one per row); draw i depends only on (stream key, i).
Matrix sample(const DistributionSpec& spec, int count, const rng::Stream& stream);

// Random instances for synthetic studies: covariance A A^T / d + 0.1 I with A
// standard normal (well-conditioned SPD), mean standard normal.
GaussianSpec random_gaussian(int dim, const rng::Stream& stream, std::uint64_t index = 0);
GaussianMixtureSpec random_gmm(int dim, int components, const rng::Stream& stream,
                               std::uint64_t index = 0);

}  // namespace pfd
