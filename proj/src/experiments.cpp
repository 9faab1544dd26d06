#include "pfd/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pfd/parallel.hpp"

namespace pfd {

namespace {

constexpr std::uint64_t kTagPairP = 0x5041ull;
constexpr std::uint64_t kTagPairQ = 0x5042ull;
constexpr std::uint64_t kTagNoise = 0x4e4full;
constexpr std::uint64_t kTagSamplesX = 0x5358ull;
constexpr std::uint64_t kTagSamplesY = 0x5359ull;
constexpr std::uint64_t kTagTeacher = 0x5443ull;
constexpr std::uint64_t kTagDataset = 0x4453ull;
constexpr std::uint64_t kTagData = 0x4441ull;

std::uint64_t experiment_tag(const std::string& name) {
    std::uint64_t tag = 0xE9;
    for (char c : name) tag = tag * 131 + static_cast<unsigned char>(c);
    return tag;
}

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void sort_rows(ResultTable& table) {
    std::stable_sort(table.rows.begin(), table.rows.end(),
                     [](const ResultRow& a, const ResultRow& b) {
                         if (a.trial != b.trial) return a.trial < b.trial;
                         if (a.param_key != b.param_key) return a.param_key < b.param_key;
                         char* end_a = nullptr;
                         char* end_b = nullptr;
                         const double pa = std::strtod(a.param_value.c_str(), &end_a);
                         const double pb = std::strtod(b.param_value.c_str(), &end_b);
                         const bool num_a = end_a && *end_a == '\0';
                         const bool num_b = end_b && *end_b == '\0';
                         if (num_a && num_b && pa != pb) return pa < pb;
                         if (a.param_value != b.param_value) return a.param_value < b.param_value;
                         return a.metric < b.metric;
                     });
}

// Runs one body per trial on the worker pool, gathers rows in trial order and
// sorts. If a trial throws, completed rows are flushed to cfg.output_path (when
// set) before the error propagates.
template <typename TrialFn>
ResultTable gather_trials(const ExperimentConfig& cfg, int trial_count, TrialFn&& body) {
    std::vector<std::vector<ResultRow>> per_trial(trial_count);
    std::exception_ptr error;
    try {
        parallel_for(
            static_cast<std::size_t>(trial_count),
            [&](std::size_t t) { per_trial[t] = body(static_cast<long long>(t)); },
            cfg.threads);
    } catch (...) {
        error = std::current_exception();
    }
    ResultTable table;
    for (auto& rows : per_trial) {
        table.rows.insert(table.rows.end(), rows.begin(), rows.end());
    }
    sort_rows(table);
    if (error) {
        if (!cfg.output_path.empty() && !table.rows.empty()) {
            emit(table, EmitFormat::kCsv, cfg.output_path);
        }
        std::rethrow_exception(error);
    }
    return table;
}

}  // namespace

ExperimentConfig ExperimentConfig::with_defaults() const {
    ExperimentConfig cfg = *this;
    if (cfg.solver.grid.nodes.empty()) {
        cfg.solver.method = SolverMethod::kHeun2;
        cfg.solver.grid = build_time_grid(80.0, 0.002, 64, 7.0);
    }
    if (cfg.dimension == 0) cfg.dimension = cfg.experiment == "bias-variance" ? 3 : 5;
    if (cfg.components == 0) cfg.components = 5;
    if (cfg.experiment == "sample-efficiency") {
        if (cfg.trials == 0) cfg.trials = 10;
        if (cfg.sample_counts.empty()) cfg.sample_counts = {128, 256, 512, 1024, 2048, 4096};
    } else if (cfg.experiment == "correlation") {
        if (cfg.trials == 0) cfg.trials = 100;
        if (cfg.eval_samples == 0) cfg.eval_samples = 4096;
    } else if (cfg.experiment == "mtog") {
        if (cfg.trials == 0) cfg.trials = 10;
        if (cfg.sample_counts.empty()) cfg.sample_counts = {16, 64, 256, 1024};
        if (cfg.eval_samples == 0) cfg.eval_samples = 256;
    } else if (cfg.experiment == "bias-variance") {
        if (cfg.trials == 0) cfg.trials = 3;
        if (cfg.eval_samples == 0) cfg.eval_samples = 64;
        if (cfg.ensemble_size == 0) cfg.ensemble_size = 2;
        if (cfg.dataset_size == 0) cfg.dataset_size = 64;
    } else {
        throw std::invalid_argument("unknown experiment '" + cfg.experiment + "'");
    }
    return cfg;
}

GaussianSpec fit_gaussian_mle(const Matrix& samples) {
    const auto n = samples.rows();
    if (n < 2) throw std::invalid_argument("fit_gaussian_mle: need at least 2 samples");
    const Vector mean = samples.colwise().mean();
    const Matrix centered = samples.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / double(n);
    return GaussianSpec(mean, cov);
}

ResultTable run_sample_efficiency(const ExperimentConfig& raw) {
    const ExperimentConfig cfg = raw.with_defaults();
    const std::uint64_t tag = experiment_tag("sample-efficiency");
    const std::string fp = cfg.solver.fingerprint();

    return gather_trials(cfg, cfg.trials, [&](long long t) {
        std::vector<ResultRow> rows;
        const GaussianSpec p = random_gaussian(
            cfg.dimension, rng::Stream(rng::derive_key(cfg.master_seed, tag, kTagPairP, t)));
        const GaussianSpec q = random_gaussian(
            cfg.dimension, rng::Stream(rng::derive_key(cfg.master_seed, tag, kTagPairQ, t)));
        const double pfd_true = closed_form_gaussian_pfd(p, q);
        const double w2_true = gaussian_w2(p, q);
        const double kl_true = gaussian_kl(p, q);

        const std::uint64_t noise_seed = rng::derive_key(cfg.master_seed, tag, kTagNoise, t);
        const rng::Stream xs_stream(rng::derive_key(cfg.master_seed, tag, kTagSamplesX, t));
        const rng::Stream ys_stream(rng::derive_key(cfg.master_seed, tag, kTagSamplesY, t));

        for (const int m : cfg.sample_counts) {
            const CoupledNoiseSet noise(noise_seed, m, cfg.dimension, cfg.solver.grid.sigma_max);
            EstimateOptions options;
            options.threads = 1;
            auto add = [&](const char* metric, double value) {
                rows.push_back({cfg.experiment, t, "M", std::to_string(m), metric, value,
                                cfg.master_seed, fp});
            };
            try {
                const double pfd_hat =
                    estimate_pfd(DistributionSpec(p), DistributionSpec(q), noise, cfg.solver,
                                 Descriptor::identity(), options)
                        .value;
                add("pfd_rel_err", std::abs(pfd_hat - pfd_true) / std::abs(pfd_true));
            } catch (const DivergenceError& e) {
                add("diverged", double(e.sample_index));
            }

            const Matrix xs = sample(DistributionSpec(p), m, xs_stream);
            const Matrix ys = sample(DistributionSpec(q), m, ys_stream);
            W2SampleConfig w2_cfg;
            w2_cfg.method = W2Method::kExactAssignment;
            const double w2_hat = sample_w2(xs, ys, w2_cfg).value;
            add("w2_rel_err", std::abs(w2_hat - w2_true) / std::abs(w2_true));

            const double kl_hat = gaussian_kl(fit_gaussian_mle(xs), fit_gaussian_mle(ys));
            add("kl_rel_err", std::abs(kl_hat - kl_true) / std::abs(kl_true));
        }
        return rows;
    });
}

ResultTable run_correlation(const ExperimentConfig& raw) {
    const ExperimentConfig cfg = raw.with_defaults();
    const std::uint64_t tag = experiment_tag("correlation");
    const std::string fp = cfg.solver.fingerprint();
    const int total = cfg.trials + cfg.duplicate_trials;

    ResultTable table = gather_trials(cfg, total, [&](long long t) {
        std::vector<ResultRow> rows;
        const bool duplicate = t >= cfg.trials;
        const DistributionSpec p = random_gmm(
            cfg.dimension, cfg.components,
            rng::Stream(rng::derive_key(cfg.master_seed, tag, kTagPairP, t)));
        const DistributionSpec q =
            duplicate ? p
                      : DistributionSpec(random_gmm(
                            cfg.dimension, cfg.components,
                            rng::Stream(rng::derive_key(cfg.master_seed, tag, kTagPairQ, t))));

        const CoupledNoiseSet noise(rng::derive_key(cfg.master_seed, tag, kTagNoise, t),
                                    cfg.eval_samples, cfg.dimension, cfg.solver.grid.sigma_max);
        EstimateOptions options;
        options.threads = 1;
        const double pfd_hat =
            estimate_pfd(p, q, noise, cfg.solver, Descriptor::identity(), options).value;

        const rng::Stream xs_stream(rng::derive_key(cfg.master_seed, tag, kTagSamplesX, t));
        // Duplicate trials reuse the x-stream so both sample sets coincide and
        // the exact matching cost is identically zero.
        const rng::Stream ys_stream =
            duplicate ? xs_stream
                      : rng::Stream(rng::derive_key(cfg.master_seed, tag, kTagSamplesY, t));
        const Matrix xs = sample(p, cfg.eval_samples, xs_stream);
        const Matrix ys = sample(q, cfg.eval_samples, ys_stream);
        W2SampleConfig w2_cfg;
        const double w2_hat = sample_w2(xs, ys, w2_cfg).value;

        const std::string dup = duplicate ? "1" : "0";
        rows.push_back(
            {cfg.experiment, t, "duplicate", dup, "pfd", pfd_hat, cfg.master_seed, fp});
        rows.push_back({cfg.experiment, t, "duplicate", dup, "w2", w2_hat, cfg.master_seed, fp});
        return rows;
    });

    std::vector<double> pfd_vals, w2_vals;
    for (const auto& row : table.rows) {
        if (cfg.exclude_duplicates_from_r && row.param_value == "1") continue;
        if (row.metric == "pfd") pfd_vals.push_back(row.value);
        if (row.metric == "w2") w2_vals.push_back(row.value);
    }
    table.rows.push_back({cfg.experiment, -1, "summary", "-", "pearson_r",
                          pearson_r(pfd_vals, w2_vals), cfg.master_seed, fp});
    sort_rows(table);
    return table;
}

ResultTable run_mtog_sweep(const ExperimentConfig& raw) {
    const ExperimentConfig cfg = raw.with_defaults();
    const std::uint64_t tag = experiment_tag("mtog");
    const std::string fp = cfg.solver.fingerprint();
    const ModelBuilder builder = make_model_builder(cfg.builder);
    const GaussianMixtureSpec teacher =
        random_gmm(cfg.dimension, cfg.components,
                   rng::Stream(rng::derive_key(cfg.master_seed, tag, kTagTeacher)));

    return gather_trials(cfg, cfg.trials, [&](long long t) {
        std::vector<ResultRow> rows;
        // Shared noise across the N grid within a trial (common random numbers).
        const std::uint64_t noise_seed = rng::derive_key(cfg.master_seed, tag, kTagNoise, t);
        for (const int n : cfg.sample_counts) {
            const std::uint64_t data_seed = rng::derive_key(cfg.master_seed, tag, kTagDataset,
                                                            t, std::uint64_t(n));
            const EmpiricalSpec dataset(
                sample(DistributionSpec(teacher), n, rng::Stream(data_seed)));
            EvaluationScenario scenario{DistributionSpec(teacher),
                                        builder(dataset),
                                        dataset,
                                        CoupledNoiseSet(noise_seed, cfg.eval_samples,
                                                        cfg.dimension, cfg.solver.grid.sigma_max),
                                        cfg.solver,
                                        Descriptor::identity(),
                                        data_seed,
                                        1};
            auto add = [&](const char* metric, double value) {
                rows.push_back({cfg.experiment, t, "N", std::to_string(n), metric, value,
                                cfg.master_seed, fp});
            };
            try {
                const ScenarioMetrics metrics = evaluate_scenario(scenario);
                add("e_gen", metrics.e_gen);
                add("e_mem", metrics.e_mem);
                add("m_distance", metrics.m_distance);
            } catch (const DivergenceError& e) {
                add("diverged", double(e.sample_index));
            }
        }
        return rows;
    });
}

ResultTable run_bias_variance(const ExperimentConfig& raw) {
    const ExperimentConfig cfg = raw.with_defaults();
    const std::uint64_t tag = experiment_tag("bias-variance");
    const std::string fp = cfg.solver.fingerprint();
    const ModelBuilder builder = make_model_builder(cfg.builder);

    return gather_trials(cfg, cfg.trials, [&](long long t) {
        std::vector<ResultRow> rows;
        const GaussianSpec data = random_gaussian(
            cfg.dimension, rng::Stream(rng::derive_key(cfg.master_seed, tag, kTagData, t)));
        std::vector<EmpiricalSpec> datasets;
        datasets.reserve(cfg.ensemble_size);
        for (int j = 0; j < cfg.ensemble_size; ++j) {
            datasets.emplace_back(
                sample(DistributionSpec(data), cfg.dataset_size,
                       rng::Stream(rng::derive_key(cfg.master_seed, tag, kTagDataset, t,
                                                   std::uint64_t(j)))));
        }
        const CoupledNoiseSet noise(rng::derive_key(cfg.master_seed, tag, kTagNoise, t),
                                    cfg.eval_samples, cfg.dimension, cfg.solver.grid.sigma_max);
        const BiasVarianceReport report = bias_variance(datasets, builder, DistributionSpec(data),
                                                        noise, cfg.solver,
                                                        Descriptor::identity(), 1);
        auto add = [&](const char* metric, double value) {
            rows.push_back({cfg.experiment, t, "J", std::to_string(cfg.ensemble_size), metric,
                            value, cfg.master_seed, fp});
        };
        add("e_gen_sq_mean", report.e_gen_sq_mean);
        add("e_bias_sq", report.e_bias_sq);
        add("e_var", report.e_var);
        add("residual", report.residual);
        return rows;
    });
}

ResultTable run_experiment(const ExperimentConfig& cfg) {
    const std::string& name = cfg.experiment;
    if (name == "sample-efficiency") return run_sample_efficiency(cfg);
    if (name == "correlation") return run_correlation(cfg);
    if (name == "mtog") return run_mtog_sweep(cfg);
    if (name == "bias-variance") return run_bias_variance(cfg);
    throw std::invalid_argument("unknown experiment '" + name + "'");
}

std::string to_csv(const ResultTable& table) {
    std::string out = "experiment,trial,param_key,param_value,metric,value,seed,solver_fingerprint\n";
    for (const auto& row : table.rows) {
        out += row.experiment;
        out += ',';
        out += std::to_string(row.trial);
        out += ',';
        out += row.param_key;
        out += ',';
        out += row.param_value;
        out += ',';
        out += row.metric;
        out += ',';
        out += format_value(row.value);
        out += ',';
        out += std::to_string(row.seed);
        out += ',';
        out += row.solver_fingerprint;
        out += '\n';
    }
    return out;
}

std::string to_json_string(const ResultTable& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : table.rows) {
        rows.push_back({{"experiment", row.experiment},
                        {"trial", row.trial},
                        {"param_key", row.param_key},
                        {"param_value", row.param_value},
                        {"metric", row.metric},
                        {"value", row.value},
                        {"seed", row.seed},
                        {"solver_fingerprint", row.solver_fingerprint}});
    }
    nlohmann::json out;
    out["schema_version"] = table.schema_version;
    out["rows"] = std::move(rows);
    return out.dump(2) + "\n";
}

ResultTable parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("parse_csv: empty input");
    ResultTable table;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::array<std::string, 8> fields;
        std::size_t start = 0;
        for (int f = 0; f < 7; ++f) {
            const auto pos = line.find(',', start);
            if (pos == std::string::npos) throw std::invalid_argument("parse_csv: short row");
            fields[f] = line.substr(start, pos - start);
            start = pos + 1;
        }
        fields[7] = line.substr(start);
        ResultRow row;
        row.experiment = fields[0];
        row.trial = std::stoll(fields[1]);
        row.param_key = fields[2];
        row.param_value = fields[3];
        row.metric = fields[4];
        row.value = std::strtod(fields[5].c_str(), nullptr);
        row.seed = std::stoull(fields[6]);
        row.solver_fingerprint = fields[7];
        table.rows.push_back(std::move(row));
    }
    return table;
}

void emit(const ResultTable& table, EmitFormat format, const std::string& path) {
    if (table.rows.empty()) throw std::invalid_argument("emit: refusing to write an empty table");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit: cannot open for writing: " + path);
    out << (format == EmitFormat::kCsv ? to_csv(table) : to_json_string(table));
    if (!out) throw std::runtime_error("emit: write failed: " + path);
}

double pearson_r(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw std::invalid_argument("pearson_r: need two equal-length series");
    }
    const auto n = xs.size();
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= double(n);
    mean_y /= double(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mean_x;
        const double dy = ys[i] - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson_r: degenerate series");
    return sxy / std::sqrt(sxx * syy);
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median: empty input");
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace pfd
