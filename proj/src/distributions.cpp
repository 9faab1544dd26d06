#include "pfd/distributions.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pfd {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kEigenvalueClamp = 1e-12;
constexpr double kReconstructionTol = 1e-10;
constexpr double kWeightSumTol = 1e-12;

constexpr std::uint64_t kTagCategorical = 0x6361741ull;   // component / atom choice
constexpr std::uint64_t kTagComponent = 0x636f6d70ull;    // within-component normals
constexpr std::uint64_t kTagCovariance = 0x636f76ull;
constexpr std::uint64_t kTagMean = 0x6d65616eull;
constexpr std::uint64_t kTagWeights = 0x77676874ull;
constexpr std::uint64_t kTagMixture = 0x6d6978ull;

void check_dimension(int expected, const Vector& x, const char* what) {
    if (x.size() != expected) {
        throw std::invalid_argument(std::string(what) + ": expected dimension " +
                                    std::to_string(expected) + ", got " +
                                    std::to_string(x.size()));
    }
}

void check_time(double t) {
    if (!(t > 0.0)) throw std::invalid_argument("noise level t must be > 0");
}

}  // namespace

GaussianSpec::GaussianSpec(Vector mean, Matrix covariance) : mean_(std::move(mean)) {
    const auto d = mean_.size();
    if (d < 1) throw std::invalid_argument("GaussianSpec: empty mean");
    if (covariance.rows() != d || covariance.cols() != d) {
        throw std::invalid_argument("GaussianSpec: covariance shape does not match mean");
    }
    const double scale = std::max(1.0, covariance.norm());
    if ((covariance - covariance.transpose()).norm() > kSymmetryTol * scale) {
        throw std::invalid_argument("GaussianSpec: covariance is not symmetric");
    }
    covariance_ = 0.5 * (covariance + covariance.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> solver(covariance_);
    if (solver.info() != Eigen::Success) {
        throw std::invalid_argument("GaussianSpec: eigendecomposition failed");
    }
    eigenvectors_ = solver.eigenvectors();
    eigenvalues_ = solver.eigenvalues();

    const double lambda_max = eigenvalues_.maxCoeff();
    if (eigenvalues_.minCoeff() < -1e-10 * std::max(1.0, lambda_max)) {
        throw std::invalid_argument("GaussianSpec: covariance is not positive semidefinite");
    }
    for (Eigen::Index k = 0; k < d; ++k) {
        if (eigenvalues_[k] < kEigenvalueClamp * std::max(0.0, lambda_max)) eigenvalues_[k] = 0.0;
    }

    const Matrix rebuilt =
        eigenvectors_ * eigenvalues_.asDiagonal() * eigenvectors_.transpose();
    if ((rebuilt - covariance_).norm() > kReconstructionTol * scale) {
        throw std::invalid_argument("GaussianSpec: eigendecomposition reconstruction error");
    }
}

Matrix GaussianSpec::sqrt_covariance() const {
    return eigenvectors_ * eigenvalues_.cwiseSqrt().asDiagonal() * eigenvectors_.transpose();
}

Vector GaussianSpec::score(const Vector& x, double t) const {
    check_dimension(dimension(), x, "GaussianSpec::score");
    check_time(t);
    const Vector rot = eigenvectors_.transpose() * (mean_ - x);
    const Vector scaled = rot.array() / (eigenvalues_.array() + t * t);
    return eigenvectors_ * scaled;
}

double GaussianSpec::log_noised_density(const Vector& x, double t) const {
    check_dimension(dimension(), x, "GaussianSpec::log_noised_density");
    check_time(t);
    const Vector rot = eigenvectors_.transpose() * (x - mean_);
    const Eigen::ArrayXd noised = eigenvalues_.array() + t * t;
    const double quad = (rot.array().square() / noised).sum();
    const double logdet = noised.log().sum();
    return -0.5 * (dimension() * std::log(2.0 * M_PI) + logdet + quad);
}

Vector GaussianSpec::sample_one(const rng::Stream& stream, std::uint64_t index) const {
    const Vector z = stream.standard_normal(index, dimension());
    const Vector rot = eigenvectors_.transpose() * z;
    return mean_ + eigenvectors_ * (eigenvalues_.cwiseSqrt().asDiagonal() * rot);
}

GaussianMixtureSpec::GaussianMixtureSpec(std::vector<Component> components)
    : components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("GaussianMixtureSpec: no components");
    const int d = components_.front().gaussian.dimension();
    double weight_sum = 0.0;
    for (const auto& c : components_) {
        if (!(c.weight > 0.0)) {
            throw std::invalid_argument("GaussianMixtureSpec: weights must be positive");
        }
        if (c.gaussian.dimension() != d) {
            throw std::invalid_argument("GaussianMixtureSpec: component dimension mismatch");
        }
        weight_sum += c.weight;
    }
    if (std::abs(weight_sum - 1.0) > kWeightSumTol * components_.size()) {
        throw std::invalid_argument("GaussianMixtureSpec: weights must sum to 1");
    }
}

Vector GaussianMixtureSpec::score(const Vector& x, double t) const {
    check_dimension(dimension(), x, "GaussianMixtureSpec::score");
    check_time(t);
    const std::size_t k = components_.size();
    std::vector<double> logpost(k);
    std::vector<Vector> comp_score(k);
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
        const auto& c = components_[i];
        logpost[i] = std::log(c.weight) + c.gaussian.log_noised_density(x, t);
        comp_score[i] = c.gaussian.score(x, t);
        max_log = std::max(max_log, logpost[i]);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < k; ++i) norm += std::exp(logpost[i] - max_log);
    Vector out = Vector::Zero(dimension());
    for (std::size_t i = 0; i < k; ++i) {
        out += (std::exp(logpost[i] - max_log) / norm) * comp_score[i];
    }
    return out;
}

double GaussianMixtureSpec::log_noised_density(const Vector& x, double t) const {
    check_dimension(dimension(), x, "GaussianMixtureSpec::log_noised_density");
    check_time(t);
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logs(components_.size());
    for (std::size_t i = 0; i < components_.size(); ++i) {
        logs[i] = std::log(components_[i].weight) +
                  components_[i].gaussian.log_noised_density(x, t);
        max_log = std::max(max_log, logs[i]);
    }
    double acc = 0.0;
    for (double v : logs) acc += std::exp(v - max_log);
    return max_log + std::log(acc);
}

Vector GaussianMixtureSpec::sample_one(const rng::Stream& stream, std::uint64_t index) const {
    const double u = stream.child(kTagCategorical).uniform(index);
    double cdf = 0.0;
    std::size_t pick = components_.size() - 1;
    for (std::size_t i = 0; i < components_.size(); ++i) {
        cdf += components_[i].weight;
        if (u <= cdf) {
            pick = i;
            break;
        }
    }
    return components_[pick].gaussian.sample_one(stream.child(kTagComponent), index);
}

EmpiricalSpec::EmpiricalSpec(Matrix atoms, double score_floor)
    : atoms_(std::move(atoms)), score_floor_(score_floor) {
    if (atoms_.rows() < 1 || atoms_.cols() < 1) {
        throw std::invalid_argument("EmpiricalSpec: needs at least one atom");
    }
    if (!(score_floor_ > 0.0)) {
        throw std::invalid_argument("EmpiricalSpec: score floor must be > 0");
    }
}

Vector EmpiricalSpec::score_weights(const Vector& x, double t) const {
    check_dimension(dimension(), x, "EmpiricalSpec::score");
    if (t < score_floor_) {
        throw std::domain_error("EmpiricalSpec::score: t below the score floor; clamp the grid");
    }
    const double inv = -0.5 / (t * t);
    const Vector logw = inv * (atoms_.rowwise() - x.transpose()).rowwise().squaredNorm();
    const double max_log = logw.maxCoeff();
    const Vector w = (logw.array() - max_log).exp().matrix();
    return w / w.sum();
}

Vector EmpiricalSpec::score(const Vector& x, double t) const {
    const Vector w = score_weights(x, t);
    return (atoms_.transpose() * w - x) / (t * t);
}

double EmpiricalSpec::log_noised_density(const Vector& x, double t) const {
    check_dimension(dimension(), x, "EmpiricalSpec::log_noised_density");
    if (t < score_floor_) {
        throw std::domain_error("EmpiricalSpec::log_noised_density: t below the score floor");
    }
    const int d = dimension();
    const Eigen::ArrayXd sq = (atoms_.rowwise() - x.transpose()).rowwise().squaredNorm();
    const Eigen::ArrayXd logs = -0.5 * sq / (t * t);
    const double max_log = logs.maxCoeff();
    const double lse = max_log + std::log((logs - max_log).exp().sum());
    return lse - 0.5 * d * std::log(2.0 * M_PI * t * t) - std::log(double(atom_count()));
}

Vector EmpiricalSpec::sample_one(const rng::Stream& stream, std::uint64_t index) const {
    const double u = stream.child(kTagCategorical).uniform(index);
    auto pick = static_cast<Eigen::Index>(u * atom_count());
    if (pick >= atoms_.rows()) pick = atoms_.rows() - 1;
    return atoms_.row(pick).transpose();
}

int dimension(const DistributionSpec& spec) {
    return std::visit([](const auto& s) { return s.dimension(); }, spec);
}

Vector score(const DistributionSpec& spec, const Vector& x, double t) {
    return std::visit([&](const auto& s) { return s.score(x, t); }, spec);
}

double log_noised_density(const DistributionSpec& spec, const Vector& x, double t) {
    return std::visit([&](const auto& s) { return s.log_noised_density(x, t); }, spec);
}

Matrix sample(const DistributionSpec& spec, int count, const rng::Stream& stream) {
    if (count < 1) throw std::invalid_argument("sample: count must be >= 1");
    const int d = dimension(spec);
    Matrix out(count, d);
    std::visit(
        [&](const auto& s) {
            for (int i = 0; i < count; ++i) {
                out.row(i) = s.sample_one(stream, static_cast<std::uint64_t>(i)).transpose();
            }
        },
        spec);
    return out;
}

GaussianSpec random_gaussian(int dim, const rng::Stream& stream, std::uint64_t index) {
    if (dim < 1) throw std::invalid_argument("random_gaussian: dim must be >= 1");
    const Vector entries =
        stream.child(kTagCovariance).standard_normal(index, dim * dim);
    const Matrix a = Eigen::Map<const Matrix>(entries.data(), dim, dim);
    const Matrix cov = a * a.transpose() / double(dim) + 0.1 * Matrix::Identity(dim, dim);
    const Vector mean = stream.child(kTagMean).standard_normal(index, dim);
    return GaussianSpec(mean, cov);
}

GaussianMixtureSpec random_gmm(int dim, int components, const rng::Stream& stream,
                               std::uint64_t index) {
    if (components < 1) throw std::invalid_argument("random_gmm: components must be >= 1");
    std::vector<GaussianMixtureSpec::Component> comps;
    comps.reserve(components);
    const rng::Stream weights = stream.child(kTagWeights);
    double weight_sum = 0.0;
    std::vector<double> raw(components);
    for (int k = 0; k < components; ++k) {
        raw[k] = 0.2 + weights.uniform(index, static_cast<std::uint32_t>(k));
        weight_sum += raw[k];
    }
    for (int k = 0; k < components; ++k) {
        const rng::Stream comp_stream = stream.child(kTagMixture).child(k);
        GaussianSpec g = random_gaussian(dim, comp_stream, index);
        const Vector mean = 2.0 * comp_stream.child(kTagMean).standard_normal(index, dim);
        comps.push_back({raw[k] / weight_sum, GaussianSpec(mean, g.covariance())});
    }
    return GaussianMixtureSpec(std::move(comps));
}

}  // namespace pfd
