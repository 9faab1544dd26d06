#include "pfd/geneval.hpp"

#include <cmath>
#include <stdexcept>

#include "pfd/parallel.hpp"

namespace pfd {

void EvaluationScenario::validate() const {
    const int d = dimension(data_dist);
    if (dimension(model_dist) != d || training_set.dimension() != d ||
        noise.dimension() != d) {
        throw std::invalid_argument("EvaluationScenario: dimensions must agree");
    }
    descriptor.output_dimension(d);
}

PFDEstimate memorization_error(const EvaluationScenario& scenario) {
    scenario.validate();
    EstimateOptions options;
    options.threads = scenario.threads;
    return estimate_pfd(scenario.model_dist, DistributionSpec(scenario.training_set),
                        scenario.noise, scenario.solver, scenario.descriptor, options);
}

PFDEstimate generalization_error(const EvaluationScenario& scenario) {
    scenario.validate();
    EstimateOptions options;
    options.threads = scenario.threads;
    return estimate_pfd(scenario.model_dist, scenario.data_dist, scenario.noise,
                        scenario.solver, scenario.descriptor, options);
}

double m_distance(const EvaluationScenario& scenario) {
    return evaluate_scenario(scenario).m_distance;
}

ScenarioMetrics evaluate_scenario(const EvaluationScenario& scenario) {
    scenario.validate();
    const int m = scenario.noise.count();
    const int atom_count = scenario.training_set.atom_count();

    // Descriptor images of the training atoms, reused across noise samples.
    std::vector<Vector> psi_atoms(atom_count);
    for (int k = 0; k < atom_count; ++k) {
        psi_atoms[k] = scenario.descriptor.apply(scenario.training_set.atoms().row(k).transpose());
    }

    const DistributionSpec emp(scenario.training_set);
    std::vector<double> gen_sq(m), mem_sq(m), nearest(m);
    parallel_for(
        static_cast<std::size_t>(m),
        [&](std::size_t i) {
            const Vector x_t = scenario.noise.point(static_cast<int>(i));
            const Vector model_out = scenario.descriptor.apply(
                integrate_flow(scenario.model_dist, x_t, scenario.solver).x0);
            const Vector data_out = scenario.descriptor.apply(
                integrate_flow(scenario.data_dist, x_t, scenario.solver).x0);
            const Vector emp_out =
                scenario.descriptor.apply(integrate_flow(emp, x_t, scenario.solver).x0);
            gen_sq[i] = (model_out - data_out).squaredNorm();
            mem_sq[i] = (model_out - emp_out).squaredNorm();
            double best = (psi_atoms[0] - model_out).norm();
            for (int k = 1; k < atom_count; ++k) {
                best = std::min(best, (psi_atoms[k] - model_out).norm());
            }
            nearest[i] = best;
        },
        scenario.threads);

    ScenarioMetrics out;
    double gen_acc = 0.0, mem_acc = 0.0, near_acc = 0.0;
    for (int i = 0; i < m; ++i) {
        gen_acc += gen_sq[i];
        mem_acc += mem_sq[i];
        near_acc += nearest[i];
    }
    out.e_gen = std::sqrt(gen_acc / m);
    out.e_mem = std::sqrt(mem_acc / m);
    out.m_distance = near_acc / m;
    return out;
}

ModelBuilder empirical_model_builder() {
    return [](const EmpiricalSpec& dataset) { return DistributionSpec(dataset); };
}

ModelBuilder kernel_model_builder(double bandwidth) {
    if (!(bandwidth > 0.0)) {
        throw std::invalid_argument("kernel_model_builder: bandwidth must be > 0");
    }
    return [bandwidth](const EmpiricalSpec& dataset) {
        const int n = dataset.atom_count();
        const int d = dataset.dimension();
        const Matrix cov = bandwidth * bandwidth * Matrix::Identity(d, d);
        std::vector<GaussianMixtureSpec::Component> comps;
        comps.reserve(n);
        for (int i = 0; i < n; ++i) {
            comps.push_back({1.0 / n, GaussianSpec(dataset.atoms().row(i).transpose(), cov)});
        }
        return DistributionSpec(GaussianMixtureSpec(std::move(comps)));
    };
}

ModelBuilder make_model_builder(const std::string& name) {
    if (name == "empirical") return empirical_model_builder();
    if (name.rfind("kernel:", 0) == 0) {
        const double h = std::stod(name.substr(7));
        return kernel_model_builder(h);
    }
    throw std::invalid_argument("make_model_builder: unknown builder '" + name +
                                "' (use empirical or kernel:h)");
}

BiasVarianceReport decompose_bias_variance(const std::vector<Vector>& reference,
                                           const std::vector<std::vector<Vector>>& per_dataset) {
    const auto j_count = per_dataset.size();
    if (j_count < 2) throw std::invalid_argument("bias_variance: need at least 2 datasets");
    const auto m = reference.size();
    if (m == 0) throw std::invalid_argument("bias_variance: empty noise set");
    for (const auto& v : per_dataset) {
        if (v.size() != m) throw std::invalid_argument("bias_variance: ragged model outputs");
    }

    double gen_acc = 0.0, bias_acc = 0.0, var_acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        Vector mean = per_dataset[0][i];
        for (std::size_t j = 1; j < j_count; ++j) mean += per_dataset[j][i];
        mean /= double(j_count);
        bias_acc += (reference[i] - mean).squaredNorm();
        for (std::size_t j = 0; j < j_count; ++j) {
            gen_acc += (reference[i] - per_dataset[j][i]).squaredNorm();
            var_acc += (per_dataset[j][i] - mean).squaredNorm();
        }
    }

    BiasVarianceReport report;
    report.ensemble_size = static_cast<int>(j_count);
    report.e_gen_sq_mean = gen_acc / double(m * j_count);
    report.e_bias_sq = bias_acc / double(m);
    report.e_var = var_acc / double(m * j_count);
    report.residual = report.e_gen_sq_mean - report.e_bias_sq - report.e_var;
    return report;
}

BiasVarianceReport bias_variance(const std::vector<EmpiricalSpec>& datasets,
                                 const ModelBuilder& builder, const DistributionSpec& data_dist,
                                 const CoupledNoiseSet& noise, const SolverConfig& cfg,
                                 const Descriptor& descriptor, unsigned threads) {
    if (datasets.size() < 2) throw std::invalid_argument("bias_variance: need at least 2 datasets");
    const int d = dimension(data_dist);
    std::vector<DistributionSpec> models;
    models.reserve(datasets.size());
    for (const auto& dataset : datasets) {
        models.push_back(builder(dataset));
        if (dimension(models.back()) != d || dataset.dimension() != d) {
            throw std::invalid_argument("bias_variance: dimensions must agree");
        }
    }
    if (noise.dimension() != d) {
        throw std::invalid_argument("bias_variance: noise dimension mismatch");
    }
    descriptor.output_dimension(d);

    const int m = noise.count();
    std::vector<Vector> reference(m);
    std::vector<std::vector<Vector>> outputs(models.size(), std::vector<Vector>(m));
    parallel_for(
        static_cast<std::size_t>(m),
        [&](std::size_t i) {
            const Vector x_t = noise.point(static_cast<int>(i));
            reference[i] = descriptor.apply(integrate_flow(data_dist, x_t, cfg).x0);
            // The J model solves run sequentially inside the sample task.
            for (std::size_t j = 0; j < models.size(); ++j) {
                outputs[j][i] = descriptor.apply(integrate_flow(models[j], x_t, cfg).x0);
            }
        },
        threads);

    return decompose_bias_variance(reference, outputs);
}

}  // namespace pfd
