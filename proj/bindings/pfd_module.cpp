#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pfd/baselines.hpp"
#include "pfd/geneval.hpp"
#include "pfd/serialize.hpp"

namespace py = pybind11;

namespace {

pfd::DistributionSpec as_spec(const py::object& obj) {
    if (py::isinstance<pfd::GaussianSpec>(obj)) return obj.cast<pfd::GaussianSpec>();
    if (py::isinstance<pfd::GaussianMixtureSpec>(obj)) {
        return obj.cast<pfd::GaussianMixtureSpec>();
    }
    if (py::isinstance<pfd::EmpiricalSpec>(obj)) return obj.cast<pfd::EmpiricalSpec>();
    throw py::type_error("expected a GaussianSpec, GaussianMixtureSpec or EmpiricalSpec");
}

pfd::Descriptor as_descriptor(const py::object& obj) {
    if (obj.is_none()) return pfd::Descriptor::identity();
    if (py::isinstance<pfd::Descriptor>(obj)) return obj.cast<pfd::Descriptor>();
    return pfd::Descriptor::linear(obj.cast<pfd::Matrix>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "probability flow distance core";

    py::class_<pfd::GaussianSpec>(m, "GaussianSpec")
        .def(py::init<pfd::Vector, pfd::Matrix>(), py::arg("mean"), py::arg("covariance"))
        .def_property_readonly("dimension", &pfd::GaussianSpec::dimension)
        .def_property_readonly("mean", &pfd::GaussianSpec::mean)
        .def_property_readonly("covariance", &pfd::GaussianSpec::covariance)
        .def_property_readonly("eigenvalues", &pfd::GaussianSpec::eigenvalues)
        .def("sqrt_covariance", &pfd::GaussianSpec::sqrt_covariance)
        .def("score", &pfd::GaussianSpec::score, py::arg("x"), py::arg("t"))
        .def("log_noised_density", &pfd::GaussianSpec::log_noised_density, py::arg("x"),
             py::arg("t"));

    py::class_<pfd::GaussianMixtureSpec>(m, "GaussianMixtureSpec")
        .def(py::init([](const std::vector<std::pair<double, pfd::GaussianSpec>>& comps) {
                 std::vector<pfd::GaussianMixtureSpec::Component> cs;
                 cs.reserve(comps.size());
                 for (const auto& [w, g] : comps) cs.push_back({w, g});
                 return pfd::GaussianMixtureSpec(std::move(cs));
             }),
             py::arg("components"), "components: list of (weight, GaussianSpec)")
        .def_property_readonly("dimension", &pfd::GaussianMixtureSpec::dimension)
        .def("score", &pfd::GaussianMixtureSpec::score, py::arg("x"), py::arg("t"))
        .def("log_noised_density", &pfd::GaussianMixtureSpec::log_noised_density, py::arg("x"),
             py::arg("t"));

    py::class_<pfd::EmpiricalSpec>(m, "EmpiricalSpec")
        .def(py::init<pfd::Matrix, double>(), py::arg("atoms"),
             py::arg("score_floor") = pfd::EmpiricalSpec::kDefaultScoreFloor)
        .def_property_readonly("dimension", &pfd::EmpiricalSpec::dimension)
        .def_property_readonly("atoms", &pfd::EmpiricalSpec::atoms)
        .def("score", &pfd::EmpiricalSpec::score, py::arg("x"), py::arg("t"))
        .def("log_noised_density", &pfd::EmpiricalSpec::log_noised_density, py::arg("x"),
             py::arg("t"));

    py::class_<pfd::TimeGrid>(m, "TimeGrid")
        .def_readonly("sigma_max", &pfd::TimeGrid::sigma_max)
        .def_readonly("sigma_min", &pfd::TimeGrid::sigma_min)
        .def_readonly("rho", &pfd::TimeGrid::rho)
        .def_readonly("steps", &pfd::TimeGrid::steps)
        .def_readonly("nodes", &pfd::TimeGrid::nodes);
    m.def("build_time_grid", &pfd::build_time_grid, py::arg("sigma_max"), py::arg("sigma_min"),
          py::arg("steps"), py::arg("rho"));

    py::class_<pfd::SolverConfig>(m, "SolverConfig")
        .def(py::init([](const std::string& method, double sigma_max, double sigma_min,
                         int steps, double rho) {
                 pfd::SolverConfig cfg;
                 cfg.method = method == "euler" ? pfd::SolverMethod::kEuler
                                                : pfd::SolverMethod::kHeun2;
                 cfg.grid = pfd::build_time_grid(sigma_max, sigma_min, steps, rho);
                 return cfg;
             }),
             py::arg("method") = "heun", py::arg("sigma_max") = 80.0,
             py::arg("sigma_min") = 0.002, py::arg("steps") = 18, py::arg("rho") = 7.0)
        .def_readonly("grid", &pfd::SolverConfig::grid)
        .def("fingerprint", &pfd::SolverConfig::fingerprint);

    py::class_<pfd::CoupledNoiseSet>(m, "CoupledNoiseSet")
        .def(py::init<std::uint64_t, int, int, double>(), py::arg("seed"), py::arg("count"),
             py::arg("dim"), py::arg("sigma_max") = 80.0)
        .def("point", &pfd::CoupledNoiseSet::point, py::arg("i"))
        .def_property_readonly("count", &pfd::CoupledNoiseSet::count)
        .def_property_readonly("dimension", &pfd::CoupledNoiseSet::dimension);

    py::class_<pfd::LipschitzProfile>(m, "LipschitzProfile")
        .def(py::init([](double l, double eps, double xi, double t_xi) {
                 pfd::LipschitzProfile p{l, eps, xi, t_xi};
                 p.validate();
                 return p;
             }),
             py::arg("lipschitz"), py::arg("score_gap"), py::arg("tail_bound"),
             py::arg("tail_time"))
        .def_readonly("lipschitz", &pfd::LipschitzProfile::lipschitz)
        .def_readonly("score_gap", &pfd::LipschitzProfile::score_gap)
        .def_readonly("tail_bound", &pfd::LipschitzProfile::tail_bound)
        .def_readonly("tail_time", &pfd::LipschitzProfile::tail_time);

    py::class_<pfd::PFDEstimate>(m, "PFDEstimate")
        .def_readonly("value", &pfd::PFDEstimate::value)
        .def_readonly("squared_distances", &pfd::PFDEstimate::squared_distances)
        .def_readonly("samples", &pfd::PFDEstimate::samples)
        .def_readonly("seed", &pfd::PFDEstimate::seed)
        .def_readonly("concentration_halfwidth", &pfd::PFDEstimate::concentration_halfwidth)
        .def_readonly("solver_fingerprint", &pfd::PFDEstimate::solver_fingerprint);

    py::class_<pfd::BiasVarianceReport>(m, "BiasVarianceReport")
        .def_readonly("e_gen_sq_mean", &pfd::BiasVarianceReport::e_gen_sq_mean)
        .def_readonly("e_bias_sq", &pfd::BiasVarianceReport::e_bias_sq)
        .def_readonly("e_var", &pfd::BiasVarianceReport::e_var)
        .def_readonly("residual", &pfd::BiasVarianceReport::residual)
        .def_readonly("ensemble_size", &pfd::BiasVarianceReport::ensemble_size);

    m.def(
        "score",
        [](const py::object& spec, const pfd::Vector& x, double t) {
            return pfd::score(as_spec(spec), x, t);
        },
        py::arg("spec"), py::arg("x"), py::arg("t"));
    m.def(
        "log_noised_density",
        [](const py::object& spec, const pfd::Vector& x, double t) {
            return pfd::log_noised_density(as_spec(spec), x, t);
        },
        py::arg("spec"), py::arg("x"), py::arg("t"));
    m.def(
        "sample",
        [](const py::object& spec, int count, std::uint64_t seed) {
            return pfd::sample(as_spec(spec), count, pfd::rng::Stream(seed));
        },
        py::arg("spec"), py::arg("count"), py::arg("seed"));

    m.def(
        "integrate_flow",
        [](const py::object& spec, const pfd::Vector& x_t, const pfd::SolverConfig& cfg) {
            return pfd::integrate_flow(as_spec(spec), x_t, cfg).x0;
        },
        py::arg("spec"), py::arg("x_T"), py::arg("config"));
    m.def("analytic_gaussian_flow", &pfd::analytic_gaussian_flow, py::arg("spec"),
          py::arg("x_T"), py::arg("sigma_max"), py::arg("t_end"));

    m.def(
        "estimate_pfd",
        [](const py::object& p, const py::object& q, const pfd::CoupledNoiseSet& noise,
           const pfd::SolverConfig& cfg, const py::object& descriptor,
           const std::optional<pfd::LipschitzProfile>& profile, double eta, unsigned threads) {
            pfd::EstimateOptions options;
            options.profile = profile;
            options.eta = eta;
            options.threads = threads;
            return pfd::estimate_pfd(as_spec(p), as_spec(q), noise, cfg,
                                     as_descriptor(descriptor), options);
        },
        py::arg("p"), py::arg("q"), py::arg("noise"), py::arg("config"),
        py::arg("descriptor") = py::none(), py::arg("profile") = py::none(),
        py::arg("eta") = 0.05, py::arg("threads") = 0);

    m.def("closed_form_gaussian_pfd", &pfd::closed_form_gaussian_pfd, py::arg("p"), py::arg("q"));
    m.def("gaussian_w2", &pfd::gaussian_w2, py::arg("p"), py::arg("q"));
    m.def("gaussian_kl", &pfd::gaussian_kl, py::arg("p"), py::arg("q"));
    m.def(
        "sample_w2",
        [](const pfd::Matrix& xs, const pfd::Matrix& ys, const std::string& method,
           double epsilon_reg, int max_iterations) {
            pfd::W2SampleConfig cfg;
            cfg.method = method == "entropic" ? pfd::W2Method::kEntropic
                                              : pfd::W2Method::kExactAssignment;
            cfg.epsilon_reg = epsilon_reg;
            cfg.max_iterations = max_iterations;
            const auto result = pfd::sample_w2(xs, ys, cfg);
            return py::make_tuple(result.value, result.converged);
        },
        py::arg("xs"), py::arg("ys"), py::arg("method") = "exact",
        py::arg("epsilon_reg") = 0.05, py::arg("max_iterations") = 5000);

    m.def("gronwall_gap_bound", &pfd::gronwall_gap_bound, py::arg("profile"));
    m.def("sample_size_bound", &pfd::sample_size_bound, py::arg("profile"), py::arg("gamma"),
          py::arg("eta"));
    m.def("hoeffding_halfwidth", &pfd::hoeffding_halfwidth, py::arg("kappa"), py::arg("samples"),
          py::arg("eta"));

    m.def(
        "bias_variance",
        [](const std::vector<pfd::EmpiricalSpec>& datasets, const std::string& builder,
           const py::object& data_dist, const pfd::CoupledNoiseSet& noise,
           const pfd::SolverConfig& cfg, unsigned threads) {
            return pfd::bias_variance(datasets, pfd::make_model_builder(builder),
                                      as_spec(data_dist), noise, cfg,
                                      pfd::Descriptor::identity(), threads);
        },
        py::arg("datasets"), py::arg("builder"), py::arg("data_dist"), py::arg("noise"),
        py::arg("config"), py::arg("threads") = 0);

    m.def(
        "distribution_to_json",
        [](const py::object& spec) { return pfd::to_json(as_spec(spec)).dump(); },
        py::arg("spec"));
    m.def(
        "distribution_from_json",
        [](const std::string& text) -> py::object {
            const pfd::DistributionSpec spec =
                pfd::distribution_from_json(nlohmann::json::parse(text));
            return std::visit([](const auto& s) -> py::object { return py::cast(s); }, spec);
        },
        py::arg("text"));
}
