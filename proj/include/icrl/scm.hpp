#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "icrl/common.hpp"

namespace icrl {

// Zero-mean noise, parametrized by variance only. Variance 0 is allowed and
// yields a deterministic mechanism (used by exact tests).
enum class NoiseFamily { gaussian, uniform, laplace };

struct NoiseSpec {
    NoiseFamily family = NoiseFamily::gaussian;
    double variance = 0.0;
};

// Draws one noise value from its keyed stream (pure in (spec, rng key)).
double draw_noise(const NoiseSpec& spec, CounterRng rng);

enum class FactorKind { power, tanh };

// One multiplicand of a basis term. `index` addresses a variable; for
// Mechanism terms it is a slot into the parents list, for Predictor terms it
// is a latent index directly.
struct BasisFactor {
    int index = 0;
    FactorKind kind = FactorKind::power;
    int exponent = 1;  // power kind only; >= 0
};

struct BasisTerm {
    double coefficient = 0.0;
    std::vector<BasisFactor> factors;  // empty product = constant term
};

enum class MechanismForm { linear, basis };

// Structural assignment of one variable: deterministic part over its parents
// plus additive noise.
struct Mechanism {
    std::vector<int> parents;  // 0-based latent indices, distinct
    MechanismForm form = MechanismForm::linear;
    Eigen::VectorXd coefficients;  // linear form: one per parent
    std::vector<BasisTerm> terms;  // basis form: factor.index is a parent slot
    NoiseSpec noise;

    // Deterministic part evaluated at a full latent vector.
    double evaluate(const Eigen::VectorXd& z) const;

    static Mechanism constant(double value, const NoiseSpec& noise = {});
    static Mechanism linear(std::vector<int> parents, Eigen::VectorXd coefficients,
                            const NoiseSpec& noise = {});
};

// Additive-noise SCM over latents Z_1..Z_d plus the target Y. Y is never a
// parent by construction: parent indices live in [0, d).
struct Scm {
    int d = 0;
    std::vector<Mechanism> latent_mechanisms;  // one per Z_i
    Mechanism target_mechanism;                // f_causal + eps_Y

    double noise_floor() const { return target_mechanism.noise.variance; }
};

// do-intervention: Z_j := values[k] for targets[k] = j. Y is not addressable.
struct Intervention {
    std::vector<int> targets;  // 0-based, distinct
    Eigen::VectorXd values;

    bool full_support(int d) const { return static_cast<int>(targets.size()) == d; }
};

struct EnvironmentSet {
    std::vector<Intervention> environments;
    std::vector<std::string> labels;

    int size() const { return static_cast<int>(environments.size()); }
    // True iff every environment intervenes on all of [d], as the exact-mode
    // risk evaluators require.
    bool full_support(int d) const;
    // Largest |a_j| over all environments; 0 for an empty value set.
    double max_abs_value() const;
};

struct Dataset {
    Eigen::MatrixXd z;  // n x d
    Eigen::VectorXd y;  // n
    int env_index = -1; // -1 = observational
    std::uint64_t seed = 0;

    long n() const { return static_cast<long>(z.rows()); }
};

// Checks all structural invariants and returns a topological order over the
// node ids 0..d (latents by index, Y = d, always last).
std::vector<int> validate(const Scm& scm);

// Returns a copy where each targeted mechanism is the constant a_j with zero
// noise; everything else is bit-identical. The input is not modified.
Scm apply_intervention(const Scm& scm, const Intervention& iv);

// Ancestral sampling; rows are i.i.d., bit-deterministic in (scm, n, seed).
Dataset sample(const Scm& scm, long n, std::uint64_t seed);

struct SampleWithNoise {
    Dataset data;
    Eigen::MatrixXd noise;  // n x (d+1); column d holds eps_Y
};

// Same draws as sample(), with the raw noise streams kept for re-evaluation.
SampleWithNoise sample_with_noise(const Scm& scm, long n, std::uint64_t seed);

// sample(apply_intervention(scm, envs[i]), n, substream_seed(seed, i)) with
// the dataset's env_index set to i.
Dataset sample_environment(const Scm& scm, const EnvironmentSet& envs, int env_index,
                           long n, std::uint64_t seed);

// k^d full-do environments on the uniform grid over [-a_max, a_max]^d; the
// first axis varies slowest. k = 1 places the single point at 0.
EnvironmentSet make_env_grid(int d, double a_max, int k,
                             std::uint64_t cap = 1000000);

// `count` full-do environments with values uniform on [-a_max, a_max]^d.
EnvironmentSet make_env_random_box(int d, double a_max, int count, std::uint64_t seed);

}  // namespace icrl
