#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "icrl/mixing.hpp"
#include "icrl/scm.hpp"

namespace icrl {

struct LinearPredictor {
    Eigen::VectorXd theta;  // length d
};

struct BasisPredictor {
    int dim = 0;
    std::vector<BasisTerm> terms;  // factor.index is a latent index
};

using Predictor = std::variant<LinearPredictor, BasisPredictor>;

double evaluate(const Predictor& f, const Eigen::VectorXd& z);
Eigen::VectorXd evaluate(const Predictor& f, const Eigen::MatrixXd& z_rows);
int predictor_dim(const Predictor& f);

// f_causal lifted from the target mechanism to full-latent indexing.
Predictor causal_predictor(const Scm& scm);

// h = f ∘ g⁻¹ from observations to the target. The predictor side is either
// a structured Predictor or an arbitrary callable (counterexample pairs).
struct ComposedPredictor {
    std::variant<Predictor, ScalarFn> f;
    Mixer unmixer;

    double operator()(const Eigen::VectorXd& x) const;
    double evaluate_latent(const Eigen::VectorXd& z) const;
};

enum class RiskMode { monte_carlo, exact };

struct RiskOptions {
    RiskMode mode = RiskMode::exact;
    long n = 0;             // Monte-Carlo sample size per environment
    std::uint64_t seed = 0; // master seed; environments use substreams
};

struct RiskReport {
    std::vector<double> per_env_risk;
    std::vector<std::string> env_labels;
    double worst_case = 0.0;
    int argmax_env = 0;         // ties broken by lowest index
    double noise_floor = 0.0;   // Var(eps_Y)
    double a_max = 0.0;         // largest |a_j| in the environment set
    RiskMode mode = RiskMode::exact;
    long n = 0;
    std::uint64_t seed = 0;
};

// Bias/noise/cross split of E[(Y - f(Z))²] under a full do-intervention.
struct DecompositionReport {
    double bias_sq = 0.0;     // (f_causal(a) - f(a))², exact under full do
    double noise = 0.0;       // mean eps_Y²
    double cross = 0.0;       // 2 (f_causal(a) - f(a)) mean eps_Y
    double total = 0.0;       // sum of the three
    double direct_risk = 0.0; // independently evaluated mean squared residual
    long n = 0;
};

double empirical_risk(const Predictor& f, const Dataset& data);
double empirical_risk(const ComposedPredictor& h, const Dataset& data,
                      const Eigen::MatrixXd& x);

// Closed form (f_causal(a) - f(a))² + Var(eps_Y); no sampling. Valid because
// a full do-intervention makes Z the constant a, independent of eps_Y.
double exact_do_risk(const Predictor& f, const Scm& scm, const Eigen::VectorXd& a);
double exact_do_risk(const Predictor& f, const Scm& scm, const Intervention& iv);

RiskReport worst_case_risk(const Predictor& f, const Scm& scm,
                           const EnvironmentSet& envs, const RiskOptions& options);

// ComposedPredictor variant; data_mixer is the ground-truth g that produced
// the observations (exact mode evaluates h at g(a)).
RiskReport worst_case_risk(const ComposedPredictor& h, const Mixer& data_mixer,
                           const Scm& scm, const EnvironmentSet& envs,
                           const RiskOptions& options);

DecompositionReport decomposition_diagnostics(const Predictor& f, const Scm& scm,
                                              const Intervention& env, long n,
                                              std::uint64_t seed);

// Max |h1(x) - h2(x)| over x = g_ref(z), z sampled in `box` (the box corners
// are included first so boundary-attained gaps are realized). This is the
// operational uniqueness test on Im(g_ref).
double image_restricted_equality(const ComposedPredictor& h1, const ComposedPredictor& h2,
                                 const Mixer& g_ref, const Box& box, int n_points,
                                 std::uint64_t seed);

}  // namespace icrl
