#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "pfd/experiments.hpp"
#include "pfd/serialize.hpp"

namespace {

using nlohmann::json;

struct SolverFlags {
    double sigma_max = 80.0;
    double sigma_min = 0.002;
    int steps = 18;
    double rho = 7.0;
    std::string method = "heun";

    void attach(CLI::App* app) {
        app->add_option("--sigma-max", sigma_max, "largest noise level");
        app->add_option("--sigma-min", sigma_min, "smallest noise level");
        app->add_option("--steps", steps, "ODE steps");
        app->add_option("--rho", rho, "grid warp exponent");
        app->add_option("--solver", method, "euler|heun")
            ->check(CLI::IsMember({"euler", "heun"}));
    }

    pfd::SolverConfig build() const {
        pfd::SolverConfig cfg;
        cfg.method =
            method == "euler" ? pfd::SolverMethod::kEuler : pfd::SolverMethod::kHeun2;
        cfg.grid = pfd::build_time_grid(sigma_max, sigma_min, steps, rho);
        return cfg;
    }
};

int cmd_estimate(const std::string& p_path, const std::string& q_path, int samples,
                 std::uint64_t seed, const SolverFlags& solver_flags,
                 const std::string& descriptor_arg, const std::string& per_sample_file,
                 const std::optional<pfd::LipschitzProfile>& profile, double eta,
                 unsigned threads) {
    const pfd::DistributionSpec p = pfd::load_distribution(p_path);
    const pfd::DistributionSpec q = pfd::load_distribution(q_path);
    const pfd::SolverConfig solver = solver_flags.build();
    const pfd::CoupledNoiseSet noise(seed, samples, pfd::dimension(p), solver.grid.sigma_max);

    pfd::EstimateOptions options;
    options.profile = profile;
    options.eta = eta;
    options.threads = threads;
    const pfd::PFDEstimate est =
        pfd::estimate_pfd(p, q, noise, solver, pfd::descriptor_from_cli(descriptor_arg), options);

    json out;
    out["value"] = est.value;
    out["M"] = est.samples;
    out["seed"] = est.seed;
    out["solver_fingerprint"] = est.solver_fingerprint;
    if (est.concentration_halfwidth) out["halfwidth"] = *est.concentration_halfwidth;
    if (!per_sample_file.empty()) {
        std::ofstream dump(per_sample_file, std::ios::binary);
        if (!dump) throw std::runtime_error("cannot open " + per_sample_file);
        dump << "index,squared_distance\n";
        for (std::size_t i = 0; i < est.squared_distances.size(); ++i) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, est.squared_distances[i]);
            dump << buf;
        }
        out["per_sample_file"] = per_sample_file;
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_baseline(const std::string& which, const std::string& p_path, const std::string& q_path,
                 int samples, std::uint64_t seed, const std::string& method, double epsilon_reg,
                 int max_iters) {
    const pfd::DistributionSpec p = pfd::load_distribution(p_path);
    const pfd::DistributionSpec q = pfd::load_distribution(q_path);
    json out;
    if (which == "kl") {
        const auto* gp = std::get_if<pfd::GaussianSpec>(&p);
        const auto* gq = std::get_if<pfd::GaussianSpec>(&q);
        if (!gp || !gq) throw std::invalid_argument("baseline kl needs two gaussian specs");
        out["value"] = pfd::gaussian_kl(*gp, *gq);
        out["method"] = "closed-form";
    } else if (samples <= 0) {
        const auto* gp = std::get_if<pfd::GaussianSpec>(&p);
        const auto* gq = std::get_if<pfd::GaussianSpec>(&q);
        if (!gp || !gq) {
            throw std::invalid_argument(
                "closed-form w2 needs two gaussian specs; pass --samples for the "
                "sample-based estimate");
        }
        out["value"] = pfd::gaussian_w2(*gp, *gq);
        out["method"] = "closed-form";
    } else {
        pfd::W2SampleConfig cfg;
        cfg.method = method == "entropic" ? pfd::W2Method::kEntropic
                                          : pfd::W2Method::kExactAssignment;
        cfg.epsilon_reg = epsilon_reg;
        cfg.max_iterations = max_iters;
        cfg.samples_per_side = samples;
        const pfd::Matrix xs =
            pfd::sample(p, samples, pfd::rng::Stream(pfd::rng::derive_key(seed, 0x7873ull)));
        const pfd::Matrix ys =
            pfd::sample(q, samples, pfd::rng::Stream(pfd::rng::derive_key(seed, 0x7973ull)));
        const pfd::W2SampleResult result = pfd::sample_w2(xs, ys, cfg);
        out["value"] = result.value;
        out["method"] = method;
        out["converged"] = result.converged;
        if (cfg.method == pfd::W2Method::kEntropic) out["iterations"] = result.iterations;
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_eval(const std::string& which, const std::string& scenario_path, unsigned threads) {
    pfd::EvaluationScenario scenario = pfd::load_scenario(scenario_path);
    scenario.threads = threads;
    json out;
    out["M"] = scenario.noise.count();
    out["seed"] = scenario.noise.seed();
    out["solver_fingerprint"] = scenario.solver.fingerprint();
    if (which == "gen") {
        out["metric"] = "e_gen";
        out["value"] = pfd::generalization_error(scenario).value;
    } else if (which == "mem") {
        out["metric"] = "e_mem";
        out["value"] = pfd::memorization_error(scenario).value;
    } else {
        out["metric"] = "m_distance";
        out["value"] = pfd::m_distance(scenario);
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_eval_bias_variance(const std::string& datasets_dir, const std::string& builder,
                           const std::string& data_path, int samples, std::uint64_t seed,
                           const SolverFlags& solver_flags, unsigned threads) {
    const pfd::DistributionSpec data = pfd::load_distribution(data_path);
    const pfd::SolverConfig solver = solver_flags.build();

    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(datasets_dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.size() < 2) {
        throw std::invalid_argument("bias-variance needs at least 2 dataset files in " +
                                    datasets_dir);
    }
    std::vector<pfd::EmpiricalSpec> datasets;
    for (const auto& file : files) {
        std::ifstream in(file);
        json j;
        in >> j;
        datasets.emplace_back(j.is_array() ? pfd::matrix_from_json(j)
                                           : pfd::matrix_from_json(j.at("atoms")));
    }

    const pfd::CoupledNoiseSet noise(seed, samples, pfd::dimension(data),
                                     solver.grid.sigma_max);
    const pfd::BiasVarianceReport report =
        pfd::bias_variance(datasets, pfd::make_model_builder(builder), data, noise, solver,
                           pfd::Descriptor::identity(), threads);
    json out;
    out["e_gen_sq_mean"] = report.e_gen_sq_mean;
    out["e_bias_sq"] = report.e_bias_sq;
    out["e_var"] = report.e_var;
    out["residual"] = report.residual;
    out["ensemble_size"] = report.ensemble_size;
    out["M"] = samples;
    out["seed"] = seed;
    out["solver_fingerprint"] = solver.fingerprint();
    std::cout << out.dump(2) << "\n";
    return 0;
}

pfd::ExperimentConfig experiment_config_from_json(const json& j) {
    pfd::ExperimentConfig cfg;
    if (j.contains("experiment")) cfg.experiment = j.at("experiment").get<std::string>();
    if (j.contains("dimension")) cfg.dimension = j.at("dimension").get<int>();
    if (j.contains("components")) cfg.components = j.at("components").get<int>();
    if (j.contains("sample_counts")) {
        cfg.sample_counts = j.at("sample_counts").get<std::vector<int>>();
    }
    if (j.contains("trials")) cfg.trials = j.at("trials").get<int>();
    if (j.contains("seed")) cfg.master_seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("solver")) cfg.solver = pfd::solver_from_json(j.at("solver"));
    if (j.contains("eval_samples")) cfg.eval_samples = j.at("eval_samples").get<int>();
    if (j.contains("duplicate_trials")) {
        cfg.duplicate_trials = j.at("duplicate_trials").get<int>();
    }
    if (j.contains("exclude_duplicates_from_r")) {
        cfg.exclude_duplicates_from_r = j.at("exclude_duplicates_from_r").get<bool>();
    }
    if (j.contains("builder")) cfg.builder = j.at("builder").get<std::string>();
    if (j.contains("ensemble_size")) cfg.ensemble_size = j.at("ensemble_size").get<int>();
    if (j.contains("dataset_size")) cfg.dataset_size = j.at("dataset_size").get<int>();
    return cfg;
}

std::vector<int> parse_count_list(const std::string& arg) {
    std::vector<int> counts;
    std::size_t start = 0;
    while (start <= arg.size()) {
        const auto pos = arg.find(',', start);
        const std::string piece =
            pos == std::string::npos ? arg.substr(start) : arg.substr(start, pos - start);
        if (!piece.empty()) counts.push_back(std::stoi(piece));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    if (counts.empty()) throw std::invalid_argument("empty count list");
    return counts;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"probability flow distance toolkit"};
    app.require_subcommand(1);

    // estimate
    auto* estimate = app.add_subcommand("estimate", "empirical PFD between two distributions");
    std::string p_path, q_path, descriptor_arg = "identity", per_sample_file;
    int samples = 1024;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    double eta = 0.05;
    SolverFlags est_solver;
    std::vector<double> profile_vals;
    estimate->add_option("--p", p_path, "distribution spec (json)")->required();
    estimate->add_option("--q", q_path, "distribution spec (json)")->required();
    estimate->add_option("--samples", samples, "number of coupled noise samples");
    estimate->add_option("--seed", seed, "noise seed");
    estimate->add_option("--descriptor", descriptor_arg, "identity|linear:FILE");
    estimate->add_option("--per-sample-file", per_sample_file,
                         "write per-sample squared distances (csv)");
    estimate->add_option("--profile", profile_vals,
                         "L EPS XI T_XI score-regularity constants (enables halfwidth)")
        ->expected(4);
    estimate->add_option("--eta", eta, "halfwidth failure probability");
    estimate->add_option("--threads", threads, "worker threads (0 = all)");
    est_solver.attach(estimate);

    // baseline
    auto* baseline = app.add_subcommand("baseline", "comparison distances (w2, kl)");
    baseline->require_subcommand(1);
    std::string b_p_path, b_q_path, b_method = "exact";
    int b_samples = 0;
    std::uint64_t b_seed = 0;
    double epsilon_reg = 0.05;
    int max_iters = 5000;
    auto* b_w2 = baseline->add_subcommand("w2", "2-Wasserstein distance");
    auto* b_kl = baseline->add_subcommand("kl", "KL divergence (gaussian closed form)");
    for (auto* sub : {b_w2, b_kl}) {
        sub->add_option("--p", b_p_path, "distribution spec (json)")->required();
        sub->add_option("--q", b_q_path, "distribution spec (json)")->required();
    }
    b_w2->add_option("--samples", b_samples, "per-side sample count (0 = closed form)");
    b_w2->add_option("--seed", b_seed, "sampling seed");
    b_w2->add_option("--method", b_method, "exact|entropic")
        ->check(CLI::IsMember({"exact", "entropic"}));
    b_w2->add_option("--epsilon-reg", epsilon_reg, "entropic regularization");
    b_w2->add_option("--max-iters", max_iters, "entropic iteration cap");

    // eval
    auto* eval = app.add_subcommand("eval", "generalization framework metrics");
    eval->require_subcommand(1);
    std::string scenario_path;
    unsigned eval_threads = 0;
    auto* e_gen = eval->add_subcommand("gen", "generalization error");
    auto* e_mem = eval->add_subcommand("mem", "memorization error");
    auto* e_mdist = eval->add_subcommand("mdist", "nearest-training-sample distance");
    for (auto* sub : {e_gen, e_mem, e_mdist}) {
        sub->add_option("--scenario", scenario_path, "scenario file (json)")->required();
        sub->add_option("--threads", eval_threads, "worker threads (0 = all)");
    }
    auto* e_bv = eval->add_subcommand("bias-variance", "bias-variance decomposition");
    std::string datasets_dir, bv_builder = "empirical", bv_data;
    int bv_samples = 64;
    std::uint64_t bv_seed = 0;
    SolverFlags bv_solver;
    e_bv->add_option("--datasets", datasets_dir, "directory of dataset files")->required();
    e_bv->add_option("--builder", bv_builder, "empirical|kernel:h");
    e_bv->add_option("--data", bv_data, "data distribution spec (json)")->required();
    e_bv->add_option("--samples", bv_samples, "noise sample count");
    e_bv->add_option("--seed", bv_seed, "noise seed");
    e_bv->add_option("--threads", eval_threads, "worker threads (0 = all)");
    bv_solver.attach(e_bv);

    // exp
    auto* exp = app.add_subcommand("exp", "synthetic experiment runners");
    exp->require_subcommand(1);
    std::string config_path, out_path = "results.csv", out_format = "csv", counts_arg;
    std::uint64_t exp_seed = 0;
    int exp_trials = 0, exp_dim = 0, exp_components = 0;
    bool seed_given = false;
    std::vector<CLI::App*> exp_subs;
    for (const char* name : {"sample-efficiency", "correlation", "bias-variance", "mtog"}) {
        auto* sub = exp->add_subcommand(name, std::string("run the ") + name + " study");
        sub->add_option("--config", config_path, "experiment config (json)");
        sub->add_option("--out", out_path, "output file");
        sub->add_option("--format", out_format, "csv|json")
            ->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--seed", exp_seed, "master seed")->each([&](const std::string&) {
            seed_given = true;
        });
        sub->add_option("--trials", exp_trials, "trial count");
        sub->add_option("--dim", exp_dim, "dimension");
        sub->add_option("--components", exp_components, "mixture components");
        sub->add_option("--samples", counts_arg, "comma-separated count grid");
        exp_subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (estimate->parsed()) {
            std::optional<pfd::LipschitzProfile> profile;
            if (!profile_vals.empty()) {
                profile = pfd::LipschitzProfile{profile_vals[0], profile_vals[1],
                                                profile_vals[2], profile_vals[3]};
            }
            return cmd_estimate(p_path, q_path, samples, seed, est_solver, descriptor_arg,
                                per_sample_file, profile, eta, threads);
        }
        if (baseline->parsed()) {
            return cmd_baseline(b_w2->parsed() ? "w2" : "kl", b_p_path, b_q_path, b_samples,
                                b_seed, b_method, epsilon_reg, max_iters);
        }
        if (eval->parsed()) {
            if (e_bv->parsed()) {
                return cmd_eval_bias_variance(datasets_dir, bv_builder, bv_data, bv_samples,
                                              bv_seed, bv_solver, eval_threads);
            }
            const std::string which = e_gen->parsed() ? "gen" : (e_mem->parsed() ? "mem" : "mdist");
            return cmd_eval(which, scenario_path, eval_threads);
        }
        if (exp->parsed()) {
            pfd::ExperimentConfig cfg;
            if (!config_path.empty()) {
                std::ifstream in(config_path);
                if (!in) throw std::runtime_error("cannot open config: " + config_path);
                json j;
                in >> j;
                cfg = experiment_config_from_json(j);
            }
            for (std::size_t i = 0; i < exp_subs.size(); ++i) {
                if (exp_subs[i]->parsed()) {
                    cfg.experiment =
                        std::array<const char*, 4>{"sample-efficiency", "correlation",
                                                   "bias-variance", "mtog"}[i];
                }
            }
            if (seed_given) cfg.master_seed = exp_seed;
            if (exp_trials > 0) cfg.trials = exp_trials;
            if (exp_dim > 0) cfg.dimension = exp_dim;
            if (exp_components > 0) cfg.components = exp_components;
            if (!counts_arg.empty()) cfg.sample_counts = parse_count_list(counts_arg);
            cfg.output_path = out_path;

            const pfd::ResultTable table = pfd::run_experiment(cfg);
            pfd::emit(table, out_format == "csv" ? pfd::EmitFormat::kCsv : pfd::EmitFormat::kJson,
                      out_path);
            std::cerr << "wrote " << table.rows.size() << " rows to " << out_path << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
