#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "icrl/experiment.hpp"
#include "icrl/serialize.hpp"
#include "icrl/version.hpp"

namespace fs = std::filesystem;

namespace {

struct CliState {
    bool quiet = false;
    std::optional<std::uint64_t> seed;
};

void progress(const CliState& state, const std::string& msg) {
    if (!state.quiet) std::cerr << msg << '\n';
}

icrl::Scenario load_with_override(const CliState& state, const fs::path& path,
                                  nlohmann::json* effective_json = nullptr) {
    nlohmann::json j = icrl::parse_json_file(path);
    if (state.seed && j.is_object()) j["seed"] = *state.seed;
    if (effective_json) *effective_json = j;
    return icrl::scenario_from_json(j);
}

int cmd_validate(const CliState& state, const fs::path& path) {
    const icrl::Scenario s = load_with_override(state, path);
    const icrl::EnvironmentSet envs = icrl::realize_envset(s.envset, s.scm.d);
    std::cout << "scenario OK: d=" << s.scm.d << " p=" << icrl::ambient_dim(s.mixer)
              << " environments=" << envs.size() << " n=" << s.n << " checks=";
    bool first = true;
    for (const auto kind : s.checks) {
        std::cout << (first ? "" : ",") << icrl::check_name(kind);
        first = false;
    }
    std::cout << '\n';
    return 0;
}

int cmd_run(const CliState& state, const fs::path& path, const fs::path& out_dir) {
    nlohmann::json effective;
    icrl::Scenario s = load_with_override(state, path, &effective);
    progress(state, "running " + std::to_string(s.checks.size()) + " check(s)");

    icrl::RunReport report = icrl::run_scenario(s);
    report.digest = icrl::scenario_digest(effective);
    const auto paths = icrl::write_report(report, out_dir);

    for (const icrl::CheckResult& c : report.checks) {
        std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name
                  << " metric=" << icrl::fmt_double(c.primary_metric)
                  << " tolerance=" << icrl::fmt_double(c.tolerance) << '\n';
    }
    for (const fs::path& p : paths) progress(state, "wrote " + p.string());
    std::cout << (report.all_pass ? "all checks passed" : "some checks FAILED") << '\n';
    return report.all_pass ? 0 : 1;
}

int cmd_sample(const CliState& state, const fs::path& path, int env_index,
               std::optional<long> n, const fs::path& out_csv) {
    const icrl::Scenario s = load_with_override(state, path);
    const icrl::EnvironmentSet envs = icrl::realize_envset(s.envset, s.scm.d);
    const long rows = n.value_or(s.n);
    if (rows < 1) throw icrl::ValidationError("sample: n must be >= 1");
    const icrl::Dataset data = icrl::sample_environment(s.scm, envs, env_index, rows, s.seed);
    icrl::write_dataset_csv(out_csv, data);
    progress(state, "wrote " + out_csv.string());
    return 0;
}

int cmd_counterexample(const CliState& state, const std::vector<double>& theta_values,
                       double alt_exponent, const std::optional<fs::path>& out_dir) {
    Eigen::VectorXd theta(static_cast<Eigen::Index>(theta_values.size()));
    for (std::size_t i = 0; i < theta_values.size(); ++i) {
        theta(static_cast<Eigen::Index>(i)) = theta_values[i];
    }
    const int d = static_cast<int>(theta.size());
    const icrl::ReparamMap psi = icrl::theorem2_psi(theta);
    const auto [psi_a, psi_b] = icrl::free_subspace_witness(theta, alt_exponent);

    const icrl::Box box = icrl::Box::symmetric(d, 2.0);
    const int n_points = 48 * d + 48;
    const std::uint64_t seed = 1;

    auto f_hat = [&](const Eigen::VectorXd& z) {
        return theta.dot(psi.apply(z));
    };
    const icrl::LinearityReport f_lr = icrl::linearity_test(f_hat, box, n_points, seed);

    nlohmann::json components = nlohmann::json::array();
    double psi_max_residual = 0.0;
    for (int j = 0; j < d; ++j) {
        const icrl::LinearityReport lr = icrl::linearity_test(
            [&](const Eigen::VectorXd& z) { return psi.apply(z)(j); }, box, n_points,
            seed + 1 + static_cast<std::uint64_t>(j));
        psi_max_residual = std::max(psi_max_residual, lr.max_abs_residual);
        components.push_back(icrl::linearity_to_json(lr));
    }

    double witness_gap = 0.0;
    for (int i = 0; i < n_points; ++i) {
        const Eigen::VectorXd z = box.sample(seed + 999, static_cast<std::uint64_t>(i));
        witness_gap = std::max(witness_gap,
                               (psi_a.apply(z) - psi_b.apply(z)).cwiseAbs().maxCoeff());
    }

    std::cout << "f_hat coefficients:";
    for (Eigen::Index i = 0; i < f_lr.coefficients.size(); ++i) {
        std::cout << ' ' << icrl::fmt_double(f_lr.coefficients(i));
    }
    std::cout << "\nf_hat intercept: " << icrl::fmt_double(f_lr.intercept)
              << "\nf_hat verdict: " << (f_lr.linear ? "linear" : "nonlinear")
              << "\npsi verdict: " << (psi_max_residual >= 0.5 ? "nonlinear" : "linear")
              << " (max component residual " << icrl::fmt_double(psi_max_residual) << ")"
              << "\nwitness maps differ pointwise: gap " << icrl::fmt_double(witness_gap)
              << '\n';

    if (out_dir) {
        std::error_code ec;
        fs::create_directories(*out_dir, ec);
        if (ec) throw icrl::IoError("cannot create directory: " + out_dir->string());
        nlohmann::json report{{"theta", theta_values},
                              {"theta_norm", theta.norm()},
                              {"alt_exponent", alt_exponent},
                              {"psi", icrl::reparam_to_json(psi)},
                              {"f_hat_linearity", icrl::linearity_to_json(f_lr)},
                              {"psi_components", components},
                              {"psi_max_residual", psi_max_residual},
                              {"witness_pointwise_gap", witness_gap}};
        const fs::path json_path = *out_dir / "counterexample.json";
        std::ofstream os(json_path);
        if (!os) throw icrl::IoError("cannot open for writing: " + json_path.string());
        os << report.dump(2) << '\n';
        progress(state, "wrote " + json_path.string());
    }
    return 0;
}

int cmd_disentangle(const CliState&, const fs::path& zhat_path, const fs::path& z_path,
                    double tol_corr, double tol_ratio) {
    const Eigen::MatrixXd z_hat = icrl::read_latents_csv(zhat_path);
    const Eigen::MatrixXd z = icrl::read_latents_csv(z_path);
    const icrl::DisentanglementReport report =
        icrl::check_disentangled(z_hat, z, tol_corr, tol_ratio);
    std::cout << icrl::disentanglement_csv(report);
    return report.verdict ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent-SCM intervention testbed: worst-case risk, counterexample "
                 "constructions and disentanglement scoring"};
    app.set_version_flag("--version", std::string(icrl::kVersion));

    CliState state;
    app.add_flag("--quiet", state.quiet, "suppress progress output");
    std::uint64_t seed_value = 0;
    CLI::Option* seed_opt =
        app.add_option("--seed", seed_value, "override the scenario seed");

    std::string scenario_path;
    std::string out_dir;
    std::string out_csv;
    int env_index = 0;
    long sample_n = -1;
    std::vector<double> theta_values;
    double alt_exponent = 5.0;
    std::string cx_out;
    std::string zhat_path, z_path;
    double tol_corr = 1e-4, tol_ratio = 1e-3;

    // Let --seed/--quiet appear after the subcommand as well.
    app.fallthrough();

    CLI::App* validate = app.add_subcommand("validate", "parse and validate a scenario file");
    validate->fallthrough();
    validate->add_option("scenario", scenario_path, "scenario JSON path")->required();

    CLI::App* run = app.add_subcommand("run", "run a scenario's checks and write reports");
    run->fallthrough();
    run->add_option("scenario", scenario_path, "scenario JSON path")->required();
    run->add_option("--out", out_dir, "output directory")->required();

    CLI::App* sample = app.add_subcommand("sample", "sample one environment to CSV");
    sample->fallthrough();
    sample->add_option("scenario", scenario_path, "scenario JSON path")->required();
    sample->add_option("--env", env_index, "environment index (0-based)")->required();
    sample->add_option("--n", sample_n, "rows (default: scenario n)");
    sample->add_option("--out", out_csv, "output CSV path")->required();

    CLI::App* cx = app.add_subcommand("counterexample",
                                      "build the linearity-preserving nonlinear reparametrization "
                                      "for a linear target");
    cx->fallthrough();
    cx->add_option("--theta", theta_values, "target coefficients, comma separated")
        ->required()
        ->delimiter(',');
    cx->add_option("--alt-exponent", alt_exponent, "tail exponent of the second witness map");
    cx->add_option("--out", cx_out, "output directory for the JSON report");

    CLI::App* dis = app.add_subcommand("disentangle", "score recovered latents against truth");
    dis->fallthrough();
    dis->add_option("--zhat", zhat_path, "recovered latents CSV")->required();
    dis->add_option("--z", z_path, "ground-truth latents CSV")->required();
    dis->add_option("--tol-corr", tol_corr, "correlation tolerance");
    dis->add_option("--tol-ratio", tol_ratio, "ratio dispersion tolerance");

    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (seed_opt->count() > 0) state.seed = seed_value;

    try {
        if (validate->parsed()) return cmd_validate(state, scenario_path);
        if (run->parsed()) return cmd_run(state, scenario_path, out_dir);
        if (sample->parsed()) {
            return cmd_sample(state, scenario_path, env_index,
                              sample_n < 0 ? std::nullopt : std::optional<long>(sample_n),
                              out_csv);
        }
        if (cx->parsed()) {
            return cmd_counterexample(state, theta_values, alt_exponent,
                                      cx_out.empty() ? std::nullopt
                                                     : std::optional<fs::path>(cx_out));
        }
        if (dis->parsed()) {
            return cmd_disentangle(state, zhat_path, z_path, tol_corr, tol_ratio);
        }
    } catch (const icrl::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
