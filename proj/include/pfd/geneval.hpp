#pragma once

#include <functional>

#include "pfd/metric.hpp"

namespace pfd {

// A single evaluation setup: the true data distribution, the model under
// evaluation, the training set the model saw, and the shared noise/solver/
// descriptor everything is measured through.
struct EvaluationScenario {
    DistributionSpec data_dist;
    DistributionSpec model_dist;
    EmpiricalSpec training_set;
    CoupledNoiseSet noise;
    SolverConfig solver;
    Descriptor descriptor = Descriptor::identity();
    std::uint64_t training_seed = 0;  // seed the training set was drawn under
    unsigned threads = 0;

    void validate() const;
};

// PFD(model, empirical training distribution); the empirical flow uses the
// closed-form mixture-of-kernels score.
PFDEstimate memorization_error(const EvaluationScenario& scenario);

// PFD(model, data distribution).
PFDEstimate generalization_error(const EvaluationScenario& scenario);

// Mean nearest-training-atom distance of the model generations, in descriptor
// space. Weaker than the memorization error: zero memorization error forces a
// small value here, not conversely.
double m_distance(const EvaluationScenario& scenario);

// All three metrics from one pass of shared flow solves.
struct ScenarioMetrics {
    double e_gen = 0.0;
    double e_mem = 0.0;
    double m_distance = 0.0;
};
ScenarioMetrics evaluate_scenario(const EvaluationScenario& scenario);

struct BiasVarianceReport {
    double e_gen_sq_mean = 0.0;  // mean over (dataset, noise) of |ref - model|^2
    double e_bias_sq = 0.0;      // mean over noise of |ref - ensemble mean|^2
    double e_var = 0.0;          // mean over (dataset, noise) of |model - ensemble mean|^2
    double residual = 0.0;       // e_gen_sq_mean - e_bias_sq - e_var
    int ensemble_size = 0;
};

using ModelBuilder = std::function<DistributionSpec(const EmpiricalSpec&)>;

ModelBuilder empirical_model_builder();
// Isotropic-kernel smoothing: dataset -> uniform mixture of N(y_i, h^2 I).
ModelBuilder kernel_model_builder(double bandwidth);
ModelBuilder make_model_builder(const std::string& name);  // "empirical" | "kernel:h"

// Per noise sample i: reference r_i from the data flow, per-dataset vectors
// v_{j,i} from the J model flows, ensemble mean m_i. All four-plus maps
// consume the same noise set. The decomposition identity
// e_gen_sq_mean = e_bias_sq + e_var holds exactly up to roundoff.
BiasVarianceReport bias_variance(const std::vector<EmpiricalSpec>& datasets,
                                 const ModelBuilder& builder, const DistributionSpec& data_dist,
                                 const CoupledNoiseSet& noise, const SolverConfig& cfg,
                                 const Descriptor& descriptor = Descriptor::identity(),
                                 unsigned threads = 0);

// The pure accumulation step over precomputed descriptor-space vectors;
// exposed so the algebraic identity can be tested on synthetic inputs.
BiasVarianceReport decompose_bias_variance(const std::vector<Vector>& reference,
                                           const std::vector<std::vector<Vector>>& per_dataset);

}  // namespace pfd
