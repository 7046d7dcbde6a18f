#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "icrl/counterexample.hpp"
#include "icrl/experiment.hpp"
#include "icrl/identifiability.hpp"
#include "icrl/mixing.hpp"
#include "icrl/risk.hpp"
#include "icrl/scm.hpp"
#include "icrl/serialize.hpp"
#include "icrl/version.hpp"

namespace py = pybind11;
using namespace icrl;

namespace {

std::string dump(const json& j) { return j.dump(2); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Latent-SCM intervention testbed: sampling, worst-case risk, "
              "counterexample constructions and disentanglement scoring";
    m.attr("__version__") = kVersion;

    auto base = py::register_exception<Error>(m, "IcrlError");
    py::register_exception<CyclicGraph>(m, "CyclicGraph", base.ptr());
    py::register_exception<BadParentIndex>(m, "BadParentIndex", base.ptr());
    py::register_exception<TargetOutOfRange>(m, "TargetOutOfRange", base.ptr());
    py::register_exception<EnvIndexOutOfRange>(m, "EnvIndexOutOfRange", base.ptr());
    py::register_exception<GridTooLarge>(m, "GridTooLarge", base.ptr());
    py::register_exception<DimensionMismatch>(m, "DimensionMismatch", base.ptr());
    py::register_exception<NotInImage>(m, "NotInImage", base.ptr());
    py::register_exception<ZeroVector>(m, "ZeroVector", base.ptr());
    py::register_exception<DimensionTooSmall>(m, "DimensionTooSmall", base.ptr());
    py::register_exception<NotFullSupport>(m, "NotFullSupport", base.ptr());
    py::register_exception<DegenerateColumn>(m, "DegenerateColumn", base.ptr());
    py::register_exception<ExponentCollision>(m, "ExponentCollision", base.ptr());
    py::register_exception<RankDeficient>(m, "RankDeficient", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    // --- scm ---
    py::class_<Scm>(m, "Scm")
        .def_readonly("d", &Scm::d)
        .def("noise_floor", &Scm::noise_floor)
        .def("to_json", [](const Scm& s) { return dump(scm_to_json(s)); })
        .def("__repr__", [](const Scm& s) {
            return "<Scm d=" + std::to_string(s.d) + ">";
        });
    m.def("scm_from_json", [](const std::string& text) {
        return scm_from_json(parse_json_text(text, "scm"));
    });

    py::class_<Intervention>(m, "Intervention")
        .def(py::init([](std::vector<int> targets, Eigen::VectorXd values) {
                 return Intervention{std::move(targets), std::move(values)};
             }),
             py::arg("targets"), py::arg("values"))
        .def_readonly("targets", &Intervention::targets)
        .def_readonly("values", &Intervention::values)
        .def("full_support", &Intervention::full_support);

    py::class_<EnvironmentSet>(m, "EnvironmentSet")
        .def_readonly("labels", &EnvironmentSet::labels)
        .def_readonly("environments", &EnvironmentSet::environments)
        .def("__len__", &EnvironmentSet::size)
        .def("full_support", &EnvironmentSet::full_support)
        .def("max_abs_value", &EnvironmentSet::max_abs_value)
        .def("to_json", [](const EnvironmentSet& e) { return dump(envset_to_json(e)); });
    m.def("envset_from_json", [](const std::string& text) {
        return envset_from_json(parse_json_text(text, "envset"));
    });

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("z", &Dataset::z)
        .def_readonly("y", &Dataset::y)
        .def_readonly("env_index", &Dataset::env_index)
        .def_readonly("seed", &Dataset::seed)
        .def("__len__", &Dataset::n);

    m.def("validate", &validate, py::arg("scm"),
          "Topological order over node ids (latents 0..d-1, target = d).");
    m.def("apply_intervention", &apply_intervention, py::arg("scm"), py::arg("intervention"));
    m.def("sample", &sample, py::arg("scm"), py::arg("n"), py::arg("seed"));
    m.def("sample_environment", &sample_environment, py::arg("scm"), py::arg("envs"),
          py::arg("env_index"), py::arg("n"), py::arg("seed"));
    m.def("make_env_grid", &make_env_grid, py::arg("d"), py::arg("a_max"), py::arg("k"),
          py::arg("cap") = 1000000);
    m.def("make_env_random_box", &make_env_random_box, py::arg("d"), py::arg("a_max"),
          py::arg("count"), py::arg("seed"));
    m.def("substream_seed", &substream_seed, py::arg("master"), py::arg("stream"));

    // --- mixing ---
    py::class_<LinearMixer>(m, "LinearMixer")
        .def_static("from_matrix", &LinearMixer::from_matrix, py::arg("matrix"))
        .def_static("identity", &LinearMixer::identity, py::arg("d"))
        .def_readonly("matrix", &LinearMixer::matrix)
        .def_readonly("left_inverse", &LinearMixer::left_inverse);

    py::class_<FlowMixer>(m, "FlowMixer")
        .def_static("identity", &FlowMixer::identity, py::arg("d"))
        .def_readonly("dim", &FlowMixer::dim);

    py::class_<ReparamMap>(m, "ReparamMap")
        .def_static("identity", &ReparamMap::identity, py::arg("d"))
        .def("dim", &ReparamMap::dim)
        .def("apply",
             [](const ReparamMap& p, const Eigen::VectorXd& z) { return p.apply(z); },
             py::arg("z"))
        .def("apply_rows",
             [](const ReparamMap& p, const Eigen::MatrixXd& z) { return p.apply(z); },
             py::arg("z_rows"))
        .def("apply_inverse", &ReparamMap::apply_inverse, py::arg("w"))
        .def("inverse", &ReparamMap::inverse)
        .def("to_json", [](const ReparamMap& p) { return dump(reparam_to_json(p)); });
    m.def("reparam_from_json", [](const std::string& text) {
        return reparam_from_json(parse_json_text(text, "psi"));
    });

    m.def("mixer_from_json", [](const std::string& text) {
        return mixer_from_json(parse_json_text(text, "mixer"));
    });
    m.def("mixer_to_json", [](const Mixer& mm) { return dump(mixer_to_json(mm)); });
    m.def("latent_dim", &latent_dim);
    m.def("ambient_dim", &ambient_dim);
    m.def("mix",
          [](const Mixer& mm, const Eigen::VectorXd& z) { return mix(mm, z); },
          py::arg("mixer"), py::arg("z"));
    m.def("mix_rows",
          [](const Mixer& mm, const Eigen::MatrixXd& z) { return mix(mm, z); },
          py::arg("mixer"), py::arg("z_rows"));
    m.def("unmix",
          [](const Mixer& mm, const Eigen::VectorXd& x) { return unmix(mm, x); },
          py::arg("mixer"), py::arg("x"));
    m.def("unmix_rows",
          [](const Mixer& mm, const Eigen::MatrixXd& x) { return unmix(mm, x); },
          py::arg("mixer"), py::arg("x_rows"));
    m.def("compose", &compose, py::arg("mixer"), py::arg("psi"));
    m.def("householder_to_e1", &householder_to_e1, py::arg("theta"));
    m.def("cube_tail", &cube_tail, py::arg("d"));
    m.def("power_tail", &power_tail, py::arg("d"), py::arg("exponent"));

    // --- risk ---
    py::class_<LinearPredictor>(m, "LinearPredictor")
        .def(py::init([](Eigen::VectorXd theta) { return LinearPredictor{std::move(theta)}; }),
             py::arg("theta"))
        .def_readonly("theta", &LinearPredictor::theta);
    py::class_<BasisPredictor>(m, "BasisPredictor").def_readonly("dim", &BasisPredictor::dim);
    m.def("predictor_from_json", [](const std::string& text) {
        return predictor_from_json(parse_json_text(text, "predictor"));
    });
    m.def("predictor_to_json", [](const Predictor& f) { return dump(predictor_to_json(f)); });
    m.def("causal_predictor", &causal_predictor, py::arg("scm"));
    m.def("evaluate_predictor",
          [](const Predictor& f, const Eigen::VectorXd& z) { return evaluate(f, z); },
          py::arg("predictor"), py::arg("z"));
    m.def("evaluate_predictor_rows",
          [](const Predictor& f, const Eigen::MatrixXd& z) { return evaluate(f, z); },
          py::arg("predictor"), py::arg("z_rows"));

    py::class_<ComposedPredictor>(m, "ComposedPredictor")
        .def(py::init([](std::variant<Predictor, ScalarFn> f, Mixer unmixer) {
                 return ComposedPredictor{std::move(f), std::move(unmixer)};
             }),
             py::arg("f"), py::arg("unmixer"))
        .def("__call__", &ComposedPredictor::operator(), py::arg("x"))
        .def("evaluate_latent", &ComposedPredictor::evaluate_latent, py::arg("z"));

    py::enum_<RiskMode>(m, "RiskMode")
        .value("monte_carlo", RiskMode::monte_carlo)
        .value("exact", RiskMode::exact);

    py::class_<RiskReport>(m, "RiskReport")
        .def_readonly("per_env_risk", &RiskReport::per_env_risk)
        .def_readonly("env_labels", &RiskReport::env_labels)
        .def_readonly("worst_case", &RiskReport::worst_case)
        .def_readonly("argmax_env", &RiskReport::argmax_env)
        .def_readonly("noise_floor", &RiskReport::noise_floor)
        .def_readonly("a_max", &RiskReport::a_max)
        .def_readonly("mode", &RiskReport::mode)
        .def_readonly("n", &RiskReport::n)
        .def_readonly("seed", &RiskReport::seed)
        .def("to_json", [](const RiskReport& r) { return dump(risk_report_to_json(r)); })
        .def("to_csv", &risk_report_csv);

    py::class_<DecompositionReport>(m, "DecompositionReport")
        .def_readonly("bias_sq", &DecompositionReport::bias_sq)
        .def_readonly("noise", &DecompositionReport::noise)
        .def_readonly("cross", &DecompositionReport::cross)
        .def_readonly("total", &DecompositionReport::total)
        .def_readonly("direct_risk", &DecompositionReport::direct_risk)
        .def_readonly("n", &DecompositionReport::n)
        .def("to_json", [](const DecompositionReport& r) { return dump(decomposition_to_json(r)); });

    py::class_<Box>(m, "Box")
        .def(py::init([](Eigen::VectorXd lo, Eigen::VectorXd hi) {
                 return Box{std::move(lo), std::move(hi)};
             }),
             py::arg("lo"), py::arg("hi"))
        .def_static("symmetric", &Box::symmetric, py::arg("d"), py::arg("half_width"))
        .def_readonly("lo", &Box::lo)
        .def_readonly("hi", &Box::hi);

    m.def("empirical_risk",
          [](const Predictor& f, const Dataset& d) { return empirical_risk(f, d); },
          py::arg("predictor"), py::arg("data"));
    m.def("empirical_risk_composed",
          [](const ComposedPredictor& h, const Dataset& d, const Eigen::MatrixXd& x) {
              return empirical_risk(h, d, x);
          },
          py::arg("h"), py::arg("data"), py::arg("x"));
    m.def("exact_do_risk",
          [](const Predictor& f, const Scm& s, const Eigen::VectorXd& a) {
              return exact_do_risk(f, s, a);
          },
          py::arg("predictor"), py::arg("scm"), py::arg("a"));
    m.def("exact_do_risk_env",
          [](const Predictor& f, const Scm& s, const Intervention& iv) {
              return exact_do_risk(f, s, iv);
          },
          py::arg("predictor"), py::arg("scm"), py::arg("intervention"));
    m.def("worst_case_risk",
          [](const Predictor& f, const Scm& s, const EnvironmentSet& e, RiskMode mode, long n,
             std::uint64_t seed) { return worst_case_risk(f, s, e, RiskOptions{mode, n, seed}); },
          py::arg("predictor"), py::arg("scm"), py::arg("envs"),
          py::arg("mode") = RiskMode::exact, py::arg("n") = 0, py::arg("seed") = 0);
    m.def("worst_case_risk_composed",
          [](const ComposedPredictor& h, const Mixer& g, const Scm& s, const EnvironmentSet& e,
             RiskMode mode, long n, std::uint64_t seed) {
              return worst_case_risk(h, g, s, e, RiskOptions{mode, n, seed});
          },
          py::arg("h"), py::arg("data_mixer"), py::arg("scm"), py::arg("envs"),
          py::arg("mode") = RiskMode::exact, py::arg("n") = 0, py::arg("seed") = 0);
    m.def("decomposition_diagnostics", &decomposition_diagnostics, py::arg("predictor"),
          py::arg("scm"), py::arg("env"), py::arg("n"), py::arg("seed"));
    m.def("image_restricted_equality", &image_restricted_equality, py::arg("h1"), py::arg("h2"),
          py::arg("g_ref"), py::arg("box"), py::arg("n_points"), py::arg("seed"));

    // --- identifiability ---
    py::class_<DisentanglementReport>(m, "DisentanglementReport")
        .def_readonly("verdict", &DisentanglementReport::verdict)
        .def_readonly("permutation", &DisentanglementReport::permutation)
        .def_readonly("scales", &DisentanglementReport::scales)
        .def_readonly("matched_abs_corr", &DisentanglementReport::matched_abs_corr)
        .def_readonly("ratio_dispersion", &DisentanglementReport::ratio_dispersion)
        .def_readonly("mcc", &DisentanglementReport::mcc)
        .def("to_json",
             [](const DisentanglementReport& r) { return dump(disentanglement_to_json(r)); })
        .def("to_csv", &disentanglement_csv);

    py::class_<LinearityReport>(m, "LinearityReport")
        .def_readonly("r_squared", &LinearityReport::r_squared)
        .def_readonly("max_abs_residual", &LinearityReport::max_abs_residual)
        .def_readonly("coefficients", &LinearityReport::coefficients)
        .def_readonly("intercept", &LinearityReport::intercept)
        .def_readonly("linear", &LinearityReport::linear);

    py::class_<LinearFitReport>(m, "LinearFitReport")
        .def_readonly("matrix", &LinearFitReport::matrix)
        .def_readonly("intercept", &LinearFitReport::intercept)
        .def_readonly("relative_residual", &LinearFitReport::relative_residual)
        .def_readonly("condition", &LinearFitReport::condition)
        .def_readonly("identified", &LinearFitReport::identified);

    m.def("abs_correlation_matrix", &abs_correlation_matrix, py::arg("z_hat"), py::arg("z"));
    m.def("check_disentangled", &check_disentangled, py::arg("z_hat"), py::arg("z"),
          py::arg("tol_corr") = 1e-4, py::arg("tol_ratio") = 1e-3);
    m.def("mcc", &mcc, py::arg("z_hat"), py::arg("z"));
    m.def("linearity_test", &linearity_test, py::arg("fn"), py::arg("box"), py::arg("n_points"),
          py::arg("seed"), py::arg("tol") = 1e-9);
    m.def("linear_identifiability", &linear_identifiability, py::arg("z_hat"), py::arg("z"));

    // --- counterexample ---
    py::enum_<PairProvenance>(m, "PairProvenance")
        .value("identity", PairProvenance::identity)
        .value("theorem1", PairProvenance::theorem1)
        .value("theorem2", PairProvenance::theorem2);

    py::class_<SolutionPair>(m, "SolutionPair")
        .def("f_hat", [](const SolutionPair& p, const Eigen::VectorXd& z) { return p.f_hat(z); },
             py::arg("z"))
        .def_readonly("g_hat", &SolutionPair::g_hat)
        .def_readonly("psi", &SolutionPair::psi)
        .def_readonly("provenance", &SolutionPair::provenance)
        .def("composed", &SolutionPair::composed);

    py::class_<NonIdentifiabilityReport>(m, "NonIdentifiabilityReport")
        .def_readonly("risk_causal", &NonIdentifiabilityReport::risk_causal)
        .def_readonly("risk_reparam", &NonIdentifiabilityReport::risk_reparam)
        .def_readonly("risk_gap", &NonIdentifiabilityReport::risk_gap)
        .def_readonly("disentanglement", &NonIdentifiabilityReport::disentanglement)
        .def_readonly("psi_components", &NonIdentifiabilityReport::psi_components)
        .def_readonly("psi_nonlinear", &NonIdentifiabilityReport::psi_nonlinear)
        .def_readonly("f_hat_linearity", &NonIdentifiabilityReport::f_hat_linearity)
        .def_readonly("exhibited", &NonIdentifiabilityReport::exhibited)
        .def("to_json",
             [](const NonIdentifiabilityReport& r) { return dump(non_identifiability_to_json(r)); })
        .def("to_text", [](const NonIdentifiabilityReport& r) { return to_text(r); });

    m.def("theorem1_pair", &theorem1_pair, py::arg("scm"), py::arg("g_causal"), py::arg("psi"));
    m.def("theorem2_psi", &theorem2_psi, py::arg("theta"));
    m.def("free_subspace_witness", &free_subspace_witness, py::arg("theta"),
          py::arg("alt_exponent"));
    m.def("demonstrate_non_identifiability", &demonstrate_non_identifiability, py::arg("scm"),
          py::arg("g_causal"), py::arg("psi"), py::arg("envs"), py::arg("n"), py::arg("seed"),
          py::arg("risk_tolerance") = 1e-10);

    // --- experiment ---
    py::class_<Scenario>(m, "Scenario")
        .def_property_readonly("d", [](const Scenario& s) { return s.scm.d; })
        .def_property_readonly("n", [](const Scenario& s) { return s.n; })
        .def_property_readonly("seed", [](const Scenario& s) { return s.seed; })
        .def_property_readonly("check_names",
                               [](const Scenario& s) {
                                   std::vector<std::string> names;
                                   for (const auto kind : s.checks) {
                                       names.emplace_back(check_name(kind));
                                   }
                                   return names;
                               })
        .def("to_json", [](const Scenario& s) { return dump(scenario_to_json(s)); });

    py::class_<CheckResult>(m, "CheckResult")
        .def_readonly("name", &CheckResult::name)
        .def_readonly("pass_", &CheckResult::pass)
        .def_readonly("primary_metric", &CheckResult::primary_metric)
        .def_readonly("tolerance", &CheckResult::tolerance)
        .def_property_readonly("metrics",
                               [](const CheckResult& c) { return c.metrics.dump(); });

    py::class_<RunReport>(m, "RunReport")
        .def_readonly("digest", &RunReport::digest)
        .def_readonly("tool_version", &RunReport::tool_version)
        .def_readonly("wall_clock_seconds", &RunReport::wall_clock_seconds)
        .def_readonly("all_pass", &RunReport::all_pass)
        .def_readonly("checks", &RunReport::checks)
        .def("to_json", [](const RunReport& r) { return dump(run_report_to_json(r)); });

    py::class_<PooledLinearFit>(m, "PooledLinearFit")
        .def_readonly("beta", &PooledLinearFit::beta)
        .def_readonly("intercept", &PooledLinearFit::intercept)
        .def_readonly("residual_variance", &PooledLinearFit::residual_variance)
        .def_readonly("n_total", &PooledLinearFit::n_total)
        .def_readonly("design_rank", &PooledLinearFit::design_rank)
        .def_readonly("caveat", &PooledLinearFit::caveat)
        .def("fitted_value",
             [](const PooledLinearFit& f, const Eigen::VectorXd& x) { return fitted_value(f, x); },
             py::arg("x"))
        .def("fitted_standard_error",
             [](const PooledLinearFit& f, const Eigen::VectorXd& x) {
                 return fitted_standard_error(f, x);
             },
             py::arg("x"));

    m.def("scenario_from_json", [](const std::string& text) {
        return scenario_from_json(parse_json_text(text, "scenario"));
    });
    m.def("load_scenario", &load_scenario, py::arg("path"));
    m.def("run_scenario", &run_scenario, py::arg("scenario"));
    m.def("write_report", &write_report, py::arg("report"), py::arg("out_dir"));
    m.def("realize_envset",
          [](const Scenario& s) { return realize_envset(s.envset, s.scm.d); },
          py::arg("scenario"));
    m.def("fit_pooled_linear", &fit_pooled_linear, py::arg("datasets"), py::arg("observations"));
}
