#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pfd/baselines.hpp"
#include "pfd/geneval.hpp"

namespace pfd {

// Parameters for the synthetic studies. Zero / empty fields fall back to the
// per-experiment defaults applied by with_defaults().
struct ExperimentConfig {
    std::string experiment = "sample-efficiency";  // sample-efficiency | correlation |
                                                   // bias-variance | mtog
    int dimension = 0;
    int components = 0;
    std::vector<int> sample_counts;  // M grid (sample-efficiency) or N grid (mtog)
    int trials = 0;
    std::uint64_t master_seed = 1;
    SolverConfig solver;  // defaults to Heun2 with 64 steps for experiments
    std::string output_path;

    int eval_samples = 0;  // M for flow-based estimates (correlation/mtog/bias-variance)
    int duplicate_trials = 0;             // correlation: extra p = q trials
    bool exclude_duplicates_from_r = true;
    std::string builder = "empirical";    // mtog / bias-variance model builder
    int ensemble_size = 0;                // bias-variance J
    int dataset_size = 0;                 // bias-variance N per dataset
    unsigned threads = 0;

    ExperimentConfig with_defaults() const;
};

struct ResultRow {
    std::string experiment;
    long long trial = 0;  // -1 marks summary rows
    std::string param_key;
    std::string param_value;
    std::string metric;
    double value = 0.0;
    std::uint64_t seed = 0;
    std::string solver_fingerprint;
};

struct ResultTable {
    int schema_version = 1;
    std::vector<ResultRow> rows;
};

ResultTable run_sample_efficiency(const ExperimentConfig& cfg);
ResultTable run_correlation(const ExperimentConfig& cfg);
ResultTable run_mtog_sweep(const ExperimentConfig& cfg);
ResultTable run_bias_variance(const ExperimentConfig& cfg);
ResultTable run_experiment(const ExperimentConfig& cfg);  // dispatch on cfg.experiment

enum class EmitFormat { kCsv, kJson };

std::string to_csv(const ResultTable& table);
std::string to_json_string(const ResultTable& table);
ResultTable parse_csv(const std::string& text);

// Writes the table; rejects empty tables; identical tables produce identical
// bytes.
void emit(const ResultTable& table, EmitFormat format, const std::string& path);

double pearson_r(const std::vector<double>& xs, const std::vector<double>& ys);
double median(std::vector<double> values);

// Maximum-likelihood Gaussian fit (mean and biased covariance) of row samples.
GaussianSpec fit_gaussian_mle(const Matrix& samples);

}  // namespace pfd
