#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "icrl/counterexample.hpp"
#include "icrl/risk.hpp"

namespace icrl {

enum class CheckKind { lemma1, lemma2, theorem1, theorem2, disentangle, linear_fit };

const char* check_name(CheckKind kind);

struct GridSpec {
    double a_max = 0.0;
    int k = 1;
};

struct RandomBoxSpec {
    double a_max = 0.0;
    int count = 0;
    std::uint64_t seed = 0;
};

using EnvsetSpec = std::variant<GridSpec, RandomBoxSpec, EnvironmentSet>;

EnvironmentSet realize_envset(const EnvsetSpec& spec, int d);
bool envset_spec_full_support(const EnvsetSpec& spec, int d);

struct Scenario {
    Scm scm;
    Mixer mixer;
    EnvsetSpec envset;
    long n = 0;
    std::uint64_t seed = 0;
    std::set<CheckKind> checks;
    std::optional<ReparamMap> psi;
    std::map<std::string, double> tolerances;
};

struct PlotTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    bool empty() const { return rows.empty(); }
};

struct CheckResult {
    std::string name;
    bool pass = false;
    double primary_metric = 0.0;
    double tolerance = 0.0;
    nlohmann::json metrics;
    PlotTable plot;
};

struct RunReport {
    std::string digest;        // content hash of the effective scenario
    std::string tool_version;
    double wall_clock_seconds = 0.0;
    bool all_pass = true;
    std::vector<CheckResult> checks;
};

// Parses and fully validates a scenario document (schema version "1").
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);
nlohmann::json scenario_to_json(const Scenario& s);

// FNV-1a 64 over the canonical dump of the scenario JSON.
std::string scenario_digest(const nlohmann::json& scenario_json);

// Executes enabled checks in the fixed order lemma1, lemma2, theorem1,
// theorem2, disentangle, linear_fit. Deterministic given the scenario.
RunReport run_scenario(const Scenario& s);

// Pooled OLS of y on x over full-do environments. Recovers only the
// composition h = f ∘ g⁻¹; (theta, G) are not separately identified.
struct PooledLinearFit {
    Eigen::VectorXd beta;          // p coefficients (minimum-norm solution)
    double intercept = 0.0;
    double residual_variance = 0.0;
    long n_total = 0;
    int design_rank = 0;
    Eigen::MatrixXd normal_pinv;   // pseudo-inverse of DᵀD for D = [1 X]
    std::string caveat;
};

PooledLinearFit fit_pooled_linear(const std::vector<Dataset>& datasets,
                                  const std::vector<Eigen::MatrixXd>& observations);

double fitted_value(const PooledLinearFit& fit, const Eigen::VectorXd& x);
// Standard error of the fitted value at x: sigma_hat sqrt([1 x]ᵀ N [1 x]).
double fitted_standard_error(const PooledLinearFit& fit, const Eigen::VectorXd& x);

nlohmann::json pooled_fit_to_json(const PooledLinearFit& fit);
nlohmann::json run_report_to_json(const RunReport& r);

// Writes report.json, summary.csv and plotdata_<check>.csv; returns paths.
std::vector<std::filesystem::path> write_report(const RunReport& r,
                                                const std::filesystem::path& out_dir);

}  // namespace icrl
