#include "pfd/serialize.hpp"

#include <fstream>

namespace pfd {

using nlohmann::json;

json to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty() || !j.front().is_array()) {
        throw std::invalid_argument("expected a matrix as an array of arrays");
    }
    const auto rows = j.size();
    const auto cols = j.front().size();
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (j[i].size() != cols) throw std::invalid_argument("ragged matrix rows");
        for (std::size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

Vector vector_from_json(const json& j) {
    if (!j.is_array()) throw std::invalid_argument("expected a vector as an array");
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

namespace {

json gaussian_to_json(const GaussianSpec& g) {
    json out;
    out["type"] = "gaussian";
    out["mean"] = json::array();
    for (Eigen::Index i = 0; i < g.mean().size(); ++i) out["mean"].push_back(g.mean()[i]);
    out["cov"] = to_json(g.covariance());
    return out;
}

GaussianSpec gaussian_from_json(const json& j) {
    return GaussianSpec(vector_from_json(j.at("mean")), matrix_from_json(j.at("cov")));
}

}  // namespace

json to_json(const DistributionSpec& spec) {
    return std::visit(
        [](const auto& s) -> json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, GaussianSpec>) {
                return gaussian_to_json(s);
            } else if constexpr (std::is_same_v<T, GaussianMixtureSpec>) {
                json out;
                out["type"] = "gmm";
                out["components"] = json::array();
                for (const auto& c : s.components()) {
                    json comp = gaussian_to_json(c.gaussian);
                    comp.erase("type");
                    comp["weight"] = c.weight;
                    out["components"].push_back(std::move(comp));
                }
                return out;
            } else {
                json out;
                out["type"] = "empirical";
                out["atoms"] = to_json(s.atoms());
                return out;
            }
        },
        spec);
}

DistributionSpec distribution_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "gaussian") return gaussian_from_json(j);
    if (type == "gmm") {
        std::vector<GaussianMixtureSpec::Component> comps;
        for (const auto& c : j.at("components")) {
            comps.push_back({c.at("weight").get<double>(), gaussian_from_json(c)});
        }
        return GaussianMixtureSpec(std::move(comps));
    }
    if (type == "empirical") return EmpiricalSpec(matrix_from_json(j.at("atoms")));
    throw std::invalid_argument("unknown distribution type '" + type + "'");
}

DistributionSpec load_distribution(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open distribution file: " + path);
    json j;
    in >> j;
    return distribution_from_json(j);
}

Descriptor descriptor_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "identity") return Descriptor::identity();
        return descriptor_from_cli(j.get<std::string>());
    }
    if (j.is_object() && j.contains("linear")) {
        return Descriptor::linear(matrix_from_json(j.at("linear")));
    }
    throw std::invalid_argument("descriptor must be \"identity\" or {\"linear\": [[...]]}");
}

Descriptor descriptor_from_cli(const std::string& value) {
    if (value == "identity") return Descriptor::identity();
    if (value.rfind("linear:", 0) == 0) {
        const std::string path = value.substr(7);
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open descriptor file: " + path);
        json j;
        in >> j;
        if (j.is_object() && j.contains("matrix")) return Descriptor::linear(matrix_from_json(j.at("matrix")));
        return Descriptor::linear(matrix_from_json(j));
    }
    throw std::invalid_argument("descriptor must be identity or linear:FILE");
}

SolverConfig solver_from_json(const json& j) {
    SolverConfig cfg = SolverConfig::defaults();
    double sigma_max = cfg.grid.sigma_max;
    double sigma_min = cfg.grid.sigma_min;
    double rho = cfg.grid.rho;
    int steps = cfg.grid.steps;
    if (j.contains("sigma_max")) sigma_max = j.at("sigma_max").get<double>();
    if (j.contains("sigma_min")) sigma_min = j.at("sigma_min").get<double>();
    if (j.contains("rho")) rho = j.at("rho").get<double>();
    if (j.contains("steps")) steps = j.at("steps").get<int>();
    if (j.contains("method")) {
        const std::string method = j.at("method").get<std::string>();
        if (method == "euler") {
            cfg.method = SolverMethod::kEuler;
        } else if (method == "heun") {
            cfg.method = SolverMethod::kHeun2;
        } else {
            throw std::invalid_argument("solver method must be euler or heun");
        }
    }
    cfg.grid = build_time_grid(sigma_max, sigma_min, steps, rho);
    return cfg;
}

json to_json(const SolverConfig& cfg) {
    json j;
    j["method"] = cfg.method == SolverMethod::kHeun2 ? "heun" : "euler";
    j["steps"] = cfg.grid.steps;
    j["sigma_max"] = cfg.grid.sigma_max;
    j["sigma_min"] = cfg.grid.sigma_min;
    j["rho"] = cfg.grid.rho;
    return j;
}

EvaluationScenario scenario_from_json(const json& j) {
    const DistributionSpec data = distribution_from_json(j.at("data"));
    const DistributionSpec model = distribution_from_json(j.at("model"));

    const json& ts = j.at("training_set");
    EmpiricalSpec training =
        ts.is_array() ? EmpiricalSpec(matrix_from_json(ts))
                      : EmpiricalSpec(matrix_from_json(ts.at("atoms")));

    const json& noise = j.at("noise");
    const int samples = noise.at("samples").get<int>();
    const auto seed = noise.value("seed", std::uint64_t{0});
    SolverConfig solver =
        j.contains("solver") ? solver_from_json(j.at("solver")) : SolverConfig::defaults();
    const double sigma_max = noise.value("sigma_max", solver.grid.sigma_max);

    EvaluationScenario scenario{
        data,
        model,
        std::move(training),
        CoupledNoiseSet(seed, samples, dimension(data), sigma_max),
        std::move(solver),
        j.contains("descriptor") ? descriptor_from_json(j.at("descriptor"))
                                 : Descriptor::identity(),
        j.value("training_seed", std::uint64_t{0}),
        0};
    scenario.validate();
    return scenario;
}

EvaluationScenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    json j;
    in >> j;
    return scenario_from_json(j);
}

}  // namespace pfd
