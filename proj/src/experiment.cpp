#include "icrl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "icrl/serialize.hpp"
#include "icrl/version.hpp"

namespace icrl {

namespace {

using nlohmann::json;

constexpr CheckKind kCheckOrder[] = {CheckKind::lemma1,   CheckKind::lemma2,
                                     CheckKind::theorem1, CheckKind::theorem2,
                                     CheckKind::disentangle, CheckKind::linear_fit};

const std::map<std::string, double> kDefaultTolerances = {
    {"lemma1", 1e-12},
    {"lemma2", 1e-10},
    {"theorem1", 1e-10},
    {"theorem2", 1e-9},
    {"psi_nonlinear", 0.5},
    {"disentangle_corr", 1e-4},
    {"disentangle_ratio", 1e-3},
    {"linear_fit_var_band", 0.05},
    {"linear_fit_pred_sigmas", 4.0},
};

double tolerance(const Scenario& s, const std::string& key) {
    const auto it = s.tolerances.find(key);
    if (it != s.tolerances.end()) return it->second;
    return kDefaultTolerances.at(key);
}

bool needs_full_support(CheckKind kind) {
    return kind == CheckKind::lemma1 || kind == CheckKind::lemma2 ||
           kind == CheckKind::theorem1 || kind == CheckKind::linear_fit;
}

Eigen::VectorXd do_point(const Intervention& iv, int d) {
    Eigen::VectorXd a(d);
    for (std::size_t k = 0; k < iv.targets.size(); ++k) {
        a(iv.targets[k]) = iv.values(static_cast<Eigen::Index>(k));
    }
    return a;
}

std::vector<std::string> axis_columns(int d) {
    std::vector<std::string> cols;
    cols.reserve(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) cols.push_back("a" + std::to_string(i + 1));
    return cols;
}

PlotTable risk_plot(const EnvironmentSet& envs, int d,
                    const std::vector<const RiskReport*>& reports,
                    const std::vector<std::string>& risk_names) {
    PlotTable plot;
    plot.columns = axis_columns(d);
    for (const std::string& name : risk_names) plot.columns.push_back(name);
    for (int i = 0; i < envs.size(); ++i) {
        const Eigen::VectorXd a = do_point(envs.environments[static_cast<std::size_t>(i)], d);
        std::vector<double> row(a.data(), a.data() + a.size());
        for (const RiskReport* r : reports) {
            row.push_back(r->per_env_risk[static_cast<std::size_t>(i)]);
        }
        plot.rows.push_back(std::move(row));
    }
    return plot;
}

CheckResult check_lemma1(const Scenario& s, const EnvironmentSet& envs) {
    CheckResult result;
    result.name = "lemma1";
    result.tolerance = tolerance(s, "lemma1");
    const RiskReport rr =
        worst_case_risk(causal_predictor(s.scm), s.scm, envs, RiskOptions{RiskMode::exact, 0, 0});
    result.primary_metric = std::abs(rr.worst_case - s.scm.noise_floor());
    result.pass = result.primary_metric <= result.tolerance;
    result.metrics = json{{"worst_case", rr.worst_case},
                          {"noise_floor", rr.noise_floor},
                          {"argmax_env", rr.argmax_env},
                          {"a_max", rr.a_max}};
    result.plot = risk_plot(envs, s.scm.d, {&rr}, {"risk"});
    return result;
}

CheckResult check_lemma2(const Scenario& s, const EnvironmentSet& envs) {
    CheckResult result;
    result.name = "lemma2";
    result.tolerance = tolerance(s, "lemma2");
    const ComposedPredictor h{causal_predictor(s.scm), s.mixer};
    const RiskReport rr =
        worst_case_risk(h, s.mixer, s.scm, envs, RiskOptions{RiskMode::exact, 0, 0});
    result.primary_metric = std::abs(rr.worst_case - s.scm.noise_floor());
    result.pass = result.primary_metric <= result.tolerance;
    result.metrics = json{{"worst_case", rr.worst_case},
                          {"noise_floor", rr.noise_floor},
                          {"argmax_env", rr.argmax_env},
                          {"a_max", rr.a_max}};
    result.plot = risk_plot(envs, s.scm.d, {&rr}, {"risk"});
    return result;
}

CheckResult check_theorem1(const Scenario& s, const EnvironmentSet& envs) {
    CheckResult result;
    result.name = "theorem1";
    result.tolerance = tolerance(s, "theorem1");
    const NonIdentifiabilityReport bundle = demonstrate_non_identifiability(
        s.scm, s.mixer, *s.psi, envs, s.n, s.seed, result.tolerance);
    result.primary_metric = bundle.risk_gap;
    result.pass = bundle.exhibited;
    result.metrics = json{{"risk_gap", bundle.risk_gap},
                          {"worst_case_causal", bundle.risk_causal.worst_case},
                          {"worst_case_reparam", bundle.risk_reparam.worst_case},
                          {"disentangled", bundle.disentanglement.verdict},
                          {"mcc", bundle.disentanglement.mcc},
                          {"psi_nonlinear", bundle.psi_nonlinear},
                          {"f_hat_linear", bundle.f_hat_linearity.linear}};
    result.plot = risk_plot(envs, s.scm.d, {&bundle.risk_causal, &bundle.risk_reparam},
                            {"risk_causal", "risk_reparam"});
    return result;
}

CheckResult check_theorem2(const Scenario& s) {
    CheckResult result;
    result.name = "theorem2";
    result.tolerance = tolerance(s, "theorem2");
    const double psi_tol = tolerance(s, "psi_nonlinear");

    const Eigen::VectorXd theta = std::get<LinearPredictor>(causal_predictor(s.scm)).theta;
    const int d = s.scm.d;
    const ReparamMap psi = theorem2_psi(theta);
    const Predictor fc = causal_predictor(s.scm);

    const Box box = Box::symmetric(d, 2.0);
    const int n_points = 48 * d + 48;
    const std::uint64_t seed = substream_seed(s.seed, 0x7e2);

    const LinearityReport f_lr = linearity_test(
        [&](const Eigen::VectorXd& z) { return evaluate(fc, psi.apply(z)); }, box, n_points,
        seed);
    Eigen::VectorXd expected_slope = Eigen::VectorXd::Zero(d);
    expected_slope(0) = theta.norm();
    const double slope_err = (f_lr.coefficients - expected_slope).cwiseAbs().maxCoeff();

    double psi_max_residual = 0.0;
    for (int j = 0; j < d; ++j) {
        const LinearityReport lr = linearity_test(
            [&](const Eigen::VectorXd& z) { return psi.apply(z)(j); }, box, n_points,
            seed + 1 + static_cast<std::uint64_t>(j));
        psi_max_residual = std::max(psi_max_residual, lr.max_abs_residual);
    }

    const auto [psi_a, psi_b] = free_subspace_witness(theta, 5.0);
    double witness_f_gap = 0.0;
    double witness_psi_gap = 0.0;
    for (int i = 0; i < n_points; ++i) {
        const Eigen::VectorXd z = box.sample(seed + 1000, static_cast<std::uint64_t>(i));
        const Eigen::VectorXd wa = psi_a.apply(z);
        const Eigen::VectorXd wb = psi_b.apply(z);
        witness_f_gap = std::max(witness_f_gap,
                                 std::abs(evaluate(fc, wa) - evaluate(fc, wb)));
        witness_psi_gap = std::max(witness_psi_gap, (wa - wb).cwiseAbs().maxCoeff());
    }

    result.primary_metric = f_lr.max_abs_residual;
    result.pass = f_lr.max_abs_residual <= result.tolerance && slope_err <= 1e-8 &&
                  std::abs(f_lr.intercept) <= 1e-8 && psi_max_residual >= psi_tol &&
                  witness_f_gap <= 1e-9 && witness_psi_gap > 1e-6;
    result.metrics = json{{"f_hat_max_residual", f_lr.max_abs_residual},
                          {"f_hat_slope_error", slope_err},
                          {"f_hat_intercept", f_lr.intercept},
                          {"theta_norm", theta.norm()},
                          {"psi_max_residual", psi_max_residual},
                          {"witness_f_gap", witness_f_gap},
                          {"witness_psi_gap", witness_psi_gap}};
    result.plot.columns = {"component", "max_abs_residual"};
    for (int j = 0; j < d; ++j) {
        const LinearityReport lr = linearity_test(
            [&](const Eigen::VectorXd& z) { return psi.apply(z)(j); }, box, n_points,
            seed + 1 + static_cast<std::uint64_t>(j));
        result.plot.rows.push_back({static_cast<double>(j + 1), lr.max_abs_residual});
    }
    return result;
}

Eigen::MatrixXd pooled_latents(const Scenario& s, const EnvironmentSet& envs) {
    const long rows = std::max<long>(s.n, 1);
    Eigen::MatrixXd z(rows * envs.size(), s.scm.d);
    for (int i = 0; i < envs.size(); ++i) {
        z.middleRows(static_cast<Eigen::Index>(i) * rows, rows) =
            sample_environment(s.scm, envs, i, rows, s.seed).z;
    }
    return z;
}

CheckResult check_disentangle(const Scenario& s, const EnvironmentSet& envs) {
    CheckResult result;
    result.name = "disentangle";
    const double tol_corr = tolerance(s, "disentangle_corr");
    const double tol_ratio = tolerance(s, "disentangle_ratio");
    result.tolerance = tol_corr;

    const Eigen::MatrixXd z = pooled_latents(s, envs);
    const Mixer g_hat = s.psi ? compose(s.mixer, s.psi->inverse()) : s.mixer;
    const Eigen::MatrixXd z_hat = unmix(g_hat, mix(s.mixer, z));
    const DisentanglementReport rep = check_disentangled(z_hat, z, tol_corr, tol_ratio);

    result.primary_metric = rep.mcc;
    result.pass = rep.verdict;
    json perm = json::array();
    for (int p : rep.permutation) perm.push_back(p + 1);
    result.metrics = json{{"verdict", rep.verdict},
                          {"mcc", rep.mcc},
                          {"permutation", std::move(perm)},
                          {"min_matched_abs_corr", rep.matched_abs_corr.minCoeff()},
                          {"max_ratio_dispersion", rep.ratio_dispersion.maxCoeff()}};
    result.plot.columns = {"coord", "pi", "scale", "abs_corr", "ratio_dispersion"};
    for (std::size_t i = 0; i < rep.permutation.size(); ++i) {
        const Eigen::Index k = static_cast<Eigen::Index>(i);
        result.plot.rows.push_back({static_cast<double>(i + 1),
                                    static_cast<double>(rep.permutation[i] + 1), rep.scales(k),
                                    rep.matched_abs_corr(k), rep.ratio_dispersion(k)});
    }
    return result;
}

CheckResult check_linear_fit(const Scenario& s, const EnvironmentSet& envs) {
    CheckResult result;
    result.name = "linear_fit";
    const double band = tolerance(s, "linear_fit_var_band");
    const double sigmas = tolerance(s, "linear_fit_pred_sigmas");
    result.tolerance = band;

    std::vector<Dataset> datasets;
    std::vector<Eigen::MatrixXd> xs;
    datasets.reserve(static_cast<std::size_t>(envs.size()));
    xs.reserve(static_cast<std::size_t>(envs.size()));
    for (int i = 0; i < envs.size(); ++i) {
        datasets.push_back(sample_environment(s.scm, envs, i, s.n, s.seed));
        xs.push_back(mix(s.mixer, datasets.back().z));
    }
    const PooledLinearFit fit = fit_pooled_linear(datasets, xs);

    const double var_y = s.scm.noise_floor();
    const double var_gap = std::abs(fit.residual_variance - var_y);
    const bool var_ok = var_gap <= band * var_y + 1e-12;

    const Predictor fc = causal_predictor(s.scm);
    bool predictions_ok = true;
    double max_pred_gap = 0.0;
    result.plot.columns = axis_columns(s.scm.d);
    result.plot.columns.insert(result.plot.columns.end(), {"prediction", "truth"});
    for (int i = 0; i < envs.size(); ++i) {
        const Eigen::VectorXd a = do_point(envs.environments[static_cast<std::size_t>(i)], s.scm.d);
        const Eigen::VectorXd x = mix(s.mixer, a);
        const double pred = fitted_value(fit, x);
        const double truth = evaluate(fc, a);
        const double se = fitted_standard_error(fit, x);
        predictions_ok = predictions_ok && std::abs(pred - truth) <= sigmas * se + 1e-10;
        max_pred_gap = std::max(max_pred_gap, std::abs(pred - truth));
        std::vector<double> row(a.data(), a.data() + a.size());
        row.push_back(pred);
        row.push_back(truth);
        result.plot.rows.push_back(std::move(row));
    }

    result.primary_metric = var_gap;
    result.pass = var_ok && predictions_ok;
    result.metrics = json{{"beta", pooled_fit_to_json(fit)["beta"]},
                          {"intercept", fit.intercept},
                          {"residual_variance", fit.residual_variance},
                          {"noise_floor", var_y},
                          {"design_rank", fit.design_rank},
                          {"max_prediction_gap", max_pred_gap},
                          {"caveat", fit.caveat}};
    return result;
}

// Re-raises a module error with the failing check's name prefixed, keeping
// the concrete error type.
[[noreturn]] void rethrow_tagged(const std::string& check, const Error& e) {
    const std::string msg = check + ": " + e.what();
#define ICRL_RETHROW(Type)                                   \
    if (dynamic_cast<const Type*>(&e)) throw Type(msg)
    ICRL_RETHROW(CyclicGraph);
    ICRL_RETHROW(BadParentIndex);
    ICRL_RETHROW(TargetOutOfRange);
    ICRL_RETHROW(EnvIndexOutOfRange);
    ICRL_RETHROW(GridTooLarge);
    ICRL_RETHROW(DimensionMismatch);
    ICRL_RETHROW(NotInImage);
    ICRL_RETHROW(ZeroVector);
    ICRL_RETHROW(DimensionTooSmall);
    ICRL_RETHROW(NotFullSupport);
    ICRL_RETHROW(DegenerateColumn);
    ICRL_RETHROW(ExponentCollision);
    ICRL_RETHROW(RankDeficient);
    ICRL_RETHROW(ParseError);
    ICRL_RETHROW(SchemaError);
    ICRL_RETHROW(ValidationError);
    ICRL_RETHROW(IoError);
#undef ICRL_RETHROW
    throw Error(msg);
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

const char* check_name(CheckKind kind) {
    switch (kind) {
        case CheckKind::lemma1: return "lemma1";
        case CheckKind::lemma2: return "lemma2";
        case CheckKind::theorem1: return "theorem1";
        case CheckKind::theorem2: return "theorem2";
        case CheckKind::disentangle: return "disentangle";
        case CheckKind::linear_fit: return "linear_fit";
    }
    return "?";
}

EnvironmentSet realize_envset(const EnvsetSpec& spec, int d) {
    if (const auto* grid = std::get_if<GridSpec>(&spec)) {
        return make_env_grid(d, grid->a_max, grid->k);
    }
    if (const auto* box = std::get_if<RandomBoxSpec>(&spec)) {
        return make_env_random_box(d, box->a_max, box->count, box->seed);
    }
    return std::get<EnvironmentSet>(spec);
}

bool envset_spec_full_support(const EnvsetSpec& spec, int d) {
    if (const auto* envs = std::get_if<EnvironmentSet>(&spec)) {
        return envs->full_support(d);
    }
    return true;  // grids and random boxes intervene on every coordinate
}

namespace {

Scenario scenario_from_json_impl(const json& j) {
    check_schema_keys(j, "", {"version", "scm", "mixer", "envset", "n", "seed", "checks"},
                      {"psi", "tolerances"});
    if (!j["version"].is_string() || j["version"].get<std::string>() != "1") {
        throw ValidationError("version: expected \"1\"");
    }

    Scenario s;
    s.scm = scm_from_json(j["scm"], "scm");
    s.mixer = mixer_from_json(j["mixer"], "mixer");
    if (latent_dim(s.mixer) != s.scm.d) {
        throw ValidationError("mixer latent dimension " + std::to_string(latent_dim(s.mixer)) +
                              " does not match scm dimension d=" + std::to_string(s.scm.d));
    }

    const json& je = j["envset"];
    if (!je.is_object() || !je.contains("kind")) {
        throw SchemaError("missing field envset/kind");
    }
    if (!je["kind"].is_string()) throw SchemaError("expected a string at envset/kind");
    const std::string kind = je["kind"].get<std::string>();
    if (kind == "grid") {
        check_schema_keys(je, "envset", {"kind", "a_max", "k"});
        GridSpec g;
        g.a_max = je["a_max"].get<double>();
        g.k = je["k"].get<int>();
        if (g.k < 1) throw ValidationError("envset/k must be >= 1");
        if (!(g.a_max > 0)) throw ValidationError("envset/a_max must be > 0");
        s.envset = g;
    } else if (kind == "random_box") {
        check_schema_keys(je, "envset", {"kind", "a_max", "count", "seed"});
        RandomBoxSpec b;
        b.a_max = je["a_max"].get<double>();
        b.count = je["count"].get<int>();
        b.seed = je["seed"].get<std::uint64_t>();
        if (b.count < 1) throw ValidationError("envset/count must be >= 1");
        if (!(b.a_max > 0)) throw ValidationError("envset/a_max must be > 0");
        s.envset = b;
    } else if (kind == "explicit") {
        check_schema_keys(je, "envset", {"kind", "environments"});
        EnvironmentSet envs =
            envset_from_json(json{{"environments", je["environments"]}}, "envset");
        for (std::size_t i = 0; i < envs.environments.size(); ++i) {
            for (int t : envs.environments[i].targets) {
                if (t < 0 || t >= s.scm.d) {
                    throw ValidationError("envset/environments[" + std::to_string(i) +
                                          "]: target Z" + std::to_string(t + 1) +
                                          " outside [1, " + std::to_string(s.scm.d) + "]");
                }
            }
        }
        s.envset = std::move(envs);
    } else {
        throw ValidationError("envset/kind: unknown kind '" + kind + "'");
    }

    if (!j["n"].is_number_integer()) throw SchemaError("expected an integer at n");
    s.n = j["n"].get<long>();
    if (s.n < 1) throw ValidationError("n must be >= 1");
    if (!j["seed"].is_number_integer()) throw SchemaError("expected an integer at seed");
    s.seed = j["seed"].get<std::uint64_t>();

    if (!j["checks"].is_array()) throw SchemaError("expected an array at checks");
    for (const json& jc : j["checks"]) {
        const std::string name = jc.is_string() ? jc.get<std::string>() : "";
        bool known = false;
        for (CheckKind kind_candidate : kCheckOrder) {
            if (name == check_name(kind_candidate)) {
                s.checks.insert(kind_candidate);
                known = true;
                break;
            }
        }
        if (!known) {
            throw ValidationError("checks: unknown check '" + name +
                                  "' (expected lemma1, lemma2, theorem1, theorem2, "
                                  "disentangle or linear_fit)");
        }
    }

    if (j.contains("psi")) {
        s.psi = reparam_from_json(j["psi"], "psi");
        if (s.psi->dim() != s.scm.d) {
            throw ValidationError("psi dimension " + std::to_string(s.psi->dim()) +
                                  " does not match scm dimension d=" + std::to_string(s.scm.d));
        }
    }

    if (j.contains("tolerances")) {
        if (!j["tolerances"].is_object()) throw SchemaError("expected an object at tolerances");
        for (const auto& item : j["tolerances"].items()) {
            if (kDefaultTolerances.find(item.key()) == kDefaultTolerances.end()) {
                throw ValidationError("tolerances: unknown key '" + item.key() + "'");
            }
            s.tolerances[item.key()] = item.value().get<double>();
        }
    }

    for (CheckKind kind_enabled : s.checks) {
        if (needs_full_support(kind_enabled) && !envset_spec_full_support(s.envset, s.scm.d)) {
            throw ValidationError(std::string(check_name(kind_enabled)) +
                                  " requires full-support environments");
        }
    }
    if (s.checks.count(CheckKind::theorem1) && !s.psi) {
        throw ValidationError("theorem1 requires psi");
    }
    if (s.checks.count(CheckKind::theorem2)) {
        if (s.scm.target_mechanism.form != MechanismForm::linear) {
            throw ValidationError("theorem2 requires a linear target mechanism");
        }
        if (std::get<LinearPredictor>(causal_predictor(s.scm)).theta.norm() == 0.0) {
            throw ValidationError("theorem2 requires a nonzero target coefficient vector");
        }
        if (s.scm.d < 2) {
            throw ValidationError("theorem2 requires d >= 2");
        }
    }
    return s;
}

}  // namespace

Scenario scenario_from_json(const json& j) {
    try {
        return scenario_from_json_impl(j);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("scenario: ") + e.what());
    }
}

Scenario load_scenario(const std::filesystem::path& path) {
    return scenario_from_json(parse_json_file(path));
}

json scenario_to_json(const Scenario& s) {
    json j{{"version", "1"},
           {"scm", scm_to_json(s.scm)},
           {"mixer", mixer_to_json(s.mixer)},
           {"n", s.n},
           {"seed", s.seed}};
    if (const auto* grid = std::get_if<GridSpec>(&s.envset)) {
        j["envset"] = json{{"kind", "grid"}, {"a_max", grid->a_max}, {"k", grid->k}};
    } else if (const auto* box = std::get_if<RandomBoxSpec>(&s.envset)) {
        j["envset"] = json{{"kind", "random_box"},
                           {"a_max", box->a_max},
                           {"count", box->count},
                           {"seed", box->seed}};
    } else {
        json e = envset_to_json(std::get<EnvironmentSet>(s.envset));
        e["kind"] = "explicit";
        j["envset"] = std::move(e);
    }
    json checks = json::array();
    for (CheckKind kind : kCheckOrder) {
        if (s.checks.count(kind)) checks.push_back(check_name(kind));
    }
    j["checks"] = std::move(checks);
    if (s.psi) j["psi"] = reparam_to_json(*s.psi);
    if (!s.tolerances.empty()) j["tolerances"] = s.tolerances;
    return j;
}

std::string scenario_digest(const json& scenario_json) {
    std::ostringstream os;
    os << std::hex << fnv1a64(scenario_json.dump());
    return os.str();
}

RunReport run_scenario(const Scenario& s) {
    const auto started = std::chrono::steady_clock::now();

    RunReport report;
    report.digest = scenario_digest(scenario_to_json(s));
    report.tool_version = kVersion;

    const EnvironmentSet envs = realize_envset(s.envset, s.scm.d);
    for (CheckKind kind : kCheckOrder) {
        if (!s.checks.count(kind)) continue;
        CheckResult result;
        try {
            switch (kind) {
                case CheckKind::lemma1: result = check_lemma1(s, envs); break;
                case CheckKind::lemma2: result = check_lemma2(s, envs); break;
                case CheckKind::theorem1: result = check_theorem1(s, envs); break;
                case CheckKind::theorem2: result = check_theorem2(s); break;
                case CheckKind::disentangle: result = check_disentangle(s, envs); break;
                case CheckKind::linear_fit: result = check_linear_fit(s, envs); break;
            }
        } catch (const Error& e) {
            rethrow_tagged(check_name(kind), e);
        }
        report.all_pass = report.all_pass && result.pass;
        report.checks.push_back(std::move(result));
    }

    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

PooledLinearFit fit_pooled_linear(const std::vector<Dataset>& datasets,
                                  const std::vector<Eigen::MatrixXd>& observations) {
    if (datasets.empty() || datasets.size() != observations.size()) {
        throw ValidationError("fit_pooled_linear: need matching dataset/observation lists");
    }
    const int d = static_cast<int>(datasets[0].z.cols());
    const Eigen::Index p = observations[0].cols();
    long total = 0;
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        if (observations[i].rows() != datasets[i].z.rows() || observations[i].cols() != p) {
            throw DimensionMismatch("fit_pooled_linear: observation block " + std::to_string(i) +
                                    " has wrong shape");
        }
        total += datasets[i].n();
    }

    Eigen::MatrixXd design(total, p + 1);
    Eigen::VectorXd y(total);
    long row = 0;
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        const long n = datasets[i].n();
        design.block(row, 0, n, 1).setOnes();
        design.block(row, 1, n, p) = observations[i];
        y.segment(row, n) = datasets[i].y;
        row += n;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    const int rank = static_cast<int>(qr.rank());
    if (rank < d + 1) {
        throw RankDeficient("fit_pooled_linear: pooled interventions span only " +
                            std::to_string(rank) + " affinely independent directions; need " +
                            std::to_string(d + 1));
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-10);
    const Eigen::VectorXd beta_full = svd.solve(y);  // minimum-norm when p > d

    PooledLinearFit fit;
    fit.intercept = beta_full(0);
    fit.beta = beta_full.tail(p);
    fit.n_total = total;
    fit.design_rank = rank;

    const Eigen::VectorXd residual = y - design * beta_full;
    fit.residual_variance = residual.squaredNorm() / static_cast<double>(total - rank);

    const auto& sv = svd.singularValues();
    Eigen::VectorXd inv_sq = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > svd.threshold() * sv(0)) inv_sq(i) = 1.0 / (sv(i) * sv(i));
    }
    fit.normal_pinv = svd.matrixV() * inv_sq.asDiagonal() * svd.matrixV().transpose();
    fit.caveat =
        "coefficients identify only the composition h = f o g^-1; "
        "(theta, G) are not separately identified without further assumptions";
    return fit;
}

double fitted_value(const PooledLinearFit& fit, const Eigen::VectorXd& x) {
    if (x.size() != fit.beta.size()) {
        throw DimensionMismatch("fitted_value: x has wrong length");
    }
    return fit.intercept + fit.beta.dot(x);
}

double fitted_standard_error(const PooledLinearFit& fit, const Eigen::VectorXd& x) {
    Eigen::VectorXd v(x.size() + 1);
    v(0) = 1.0;
    v.tail(x.size()) = x;
    const double leverage = v.dot(fit.normal_pinv * v);
    return std::sqrt(std::max(0.0, fit.residual_variance * leverage));
}

json pooled_fit_to_json(const PooledLinearFit& fit) {
    json beta = json::array();
    for (Eigen::Index i = 0; i < fit.beta.size(); ++i) beta.push_back(fit.beta(i));
    return json{{"beta", std::move(beta)},
                {"intercept", fit.intercept},
                {"residual_variance", fit.residual_variance},
                {"n_total", fit.n_total},
                {"design_rank", fit.design_rank},
                {"caveat", fit.caveat}};
}

json run_report_to_json(const RunReport& r) {
    json checks = json::array();
    for (const CheckResult& c : r.checks) {
        checks.push_back(json{{"name", c.name},
                              {"pass", c.pass},
                              {"primary_metric", c.primary_metric},
                              {"tolerance", c.tolerance},
                              {"metrics", c.metrics}});
    }
    return json{{"version", "1"},
                {"digest", r.digest},
                {"tool_version", r.tool_version},
                {"wall_clock_seconds", r.wall_clock_seconds},
                {"all_pass", r.all_pass},
                {"checks", std::move(checks)}};
}

std::vector<std::filesystem::path> write_report(const RunReport& r,
                                                const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create directory: " + out_dir.string());

    std::vector<std::filesystem::path> written;
    auto open = [&](const std::filesystem::path& p) {
        std::ofstream os(p);
        if (!os) throw IoError("cannot open for writing: " + p.string());
        written.push_back(p);
        return os;
    };

    {
        auto os = open(out_dir / "report.json");
        os << run_report_to_json(r).dump(2) << '\n';
    }
    {
        auto os = open(out_dir / "summary.csv");
        os << "name,pass,primary_metric,tolerance\n";
        for (const CheckResult& c : r.checks) {
            os << c.name << ',' << (c.pass ? "true" : "false") << ','
               << fmt_double(c.primary_metric) << ',' << fmt_double(c.tolerance) << '\n';
        }
    }
    for (const CheckResult& c : r.checks) {
        if (c.plot.empty()) continue;
        auto os = open(out_dir / ("plotdata_" + c.name + ".csv"));
        for (std::size_t i = 0; i < c.plot.columns.size(); ++i) {
            os << (i ? "," : "") << c.plot.columns[i];
        }
        os << '\n';
        for (const auto& row : c.plot.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                os << (i ? "," : "") << fmt_double(row[i]);
            }
            os << '\n';
        }
    }
    return written;
}

}  // namespace icrl
