#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "icrl/risk.hpp"

using namespace icrl;
using icrl::testing::make_chain2;
using icrl::testing::oracle_risk_stderr;

namespace {

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

const Predictor kSumPredictor = LinearPredictor{vec2(1.0, 1.0)};

}  // namespace

TEST_CASE("zero-noise causal predictor has zero empirical risk") {
    const Scm scm = make_chain2(0.0, 0.0, 0.0);
    const Dataset ds = sample(scm, 100, 5);
    CHECK(empirical_risk(causal_predictor(scm), ds) == 0.0);
}

TEST_CASE("empirical risk under a full do matches the closed form within 3 stderr") {
    const Scm scm = make_chain2();
    const Intervention iv{{0, 1}, vec2(1.0, 1.0)};
    const long n = 100000;
    const Dataset ds = sample(apply_intervention(scm, iv), n, 314);
    const double risk = empirical_risk(kSumPredictor, ds);
    // gap = f_c(1,1) - f(1,1) = 3 - 2 = 1
    CHECK(std::abs(risk - 1.25) <= 3.0 * oracle_risk_stderr(1.0, 0.25, n));
}

TEST_CASE("identity-mixer composed risk equals predictor risk bit for bit") {
    const Scm scm = make_chain2();
    const Dataset ds = sample(scm, 5000, 8);
    const ComposedPredictor h{kSumPredictor, Mixer{FlowMixer::identity(2)}};
    CHECK(empirical_risk(h, ds, ds.z) == empirical_risk(kSumPredictor, ds));
}

TEST_CASE("exact_do_risk is the noise floor for the causal predictor") {
    const Scm scm = make_chain2();
    const Predictor fc = causal_predictor(scm);
    for (double a1 : {-2.0, 0.0, 1.5}) {
        for (double a2 : {-1.0, 0.5}) {
            CHECK(exact_do_risk(fc, scm, vec2(a1, a2)) == 0.25);
        }
    }
}

TEST_CASE("exact_do_risk closed form on chain2") {
    const Scm scm = make_chain2();
    CHECK(exact_do_risk(kSumPredictor, scm, vec2(1.0, 1.0)) == 1.25);

    const Scm noiseless = make_chain2(1.0, 1.0, 0.0);
    CHECK(exact_do_risk(causal_predictor(noiseless), noiseless, vec2(0.3, -0.7)) == 0.0);
}

TEST_CASE("exact_do_risk requires a full do-intervention") {
    const Scm scm = make_chain2();
    Eigen::VectorXd a1(1);
    a1 << 1.0;
    CHECK_THROWS_AS(exact_do_risk(kSumPredictor, scm, Intervention{{0}, a1}), NotFullSupport);
}

TEST_CASE("worst case of the causal predictor is flat at the floor") {
    const Scm scm = make_chain2();
    const EnvironmentSet envs = make_env_grid(2, 2.0, 3);
    const RiskReport r = worst_case_risk(causal_predictor(scm), scm, envs,
                                         RiskOptions{RiskMode::exact, 0, 0});
    CHECK(r.worst_case == 0.25);
    CHECK(r.argmax_env == 0);  // ties break to the lowest index
    CHECK(r.noise_floor == 0.25);
    CHECK(r.a_max == 2.0);
    for (double v : r.per_env_risk) CHECK(v == 0.25);
}

TEST_CASE("worst case picks the boundary gap") {
    const Scm scm = make_chain2();
    const EnvironmentSet envs = make_env_grid(2, 2.0, 3);
    const RiskReport r =
        worst_case_risk(kSumPredictor, scm, envs, RiskOptions{RiskMode::exact, 0, 0});
    // f_c - f = z_2, maximized at |a_2| = 2
    CHECK(r.worst_case == doctest::Approx(4.25).epsilon(1e-15));
}

TEST_CASE("a single environment can miss the witness") {
    const Scm scm = make_chain2();
    // f = f_causal + z1*z2: agrees with f_causal at the origin only.
    BasisPredictor f;
    f.dim = 2;
    f.terms = {BasisTerm{1.0, {BasisFactor{0, FactorKind::power, 1}}},
               BasisTerm{2.0, {BasisFactor{1, FactorKind::power, 1}}},
               BasisTerm{1.0,
                         {BasisFactor{0, FactorKind::power, 1},
                          BasisFactor{1, FactorKind::power, 1}}}};
    EnvironmentSet envs;
    envs.environments = {Intervention{{0, 1}, vec2(0.0, 0.0)}};
    envs.labels = {"origin"};
    const RiskReport r =
        worst_case_risk(Predictor{f}, scm, envs, RiskOptions{RiskMode::exact, 0, 0});
    CHECK(r.worst_case == 0.25);

    const RiskReport wide = worst_case_risk(Predictor{f}, scm, make_env_grid(2, 2.0, 3),
                                            RiskOptions{RiskMode::exact, 0, 0});
    CHECK(wide.worst_case > 0.25);
}

TEST_CASE("exact mode refuses partial-support environment sets") {
    const Scm scm = make_chain2();
    EnvironmentSet envs;
    Eigen::VectorXd a(1);
    a << 1.0;
    envs.environments = {Intervention{{0}, a}};
    envs.labels = {"partial"};
    CHECK_THROWS_AS(worst_case_risk(kSumPredictor, scm, envs,
                                    RiskOptions{RiskMode::exact, 0, 0}),
                    NotFullSupport);
}

TEST_CASE("floor property and strictness witness over random linear predictors") {
    const Scm scm = make_chain2();
    const EnvironmentSet envs = make_env_grid(2, 2.0, 4);
    const Predictor fc = causal_predictor(scm);
    CounterRng rng = CounterRng::keyed(2024, 0, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::VectorXd theta =
            vec2(1.0, 2.0) + icrl::testing::random_normal_vector(2, rng);
        const Predictor f = LinearPredictor{theta};
        const RiskReport r = worst_case_risk(f, scm, envs, RiskOptions{RiskMode::exact, 0, 0});
        CHECK(r.worst_case >= 0.25);

        double max_gap_sq = 0.0;
        for (const Intervention& iv : envs.environments) {
            Eigen::VectorXd a(2);
            for (std::size_t k = 0; k < iv.targets.size(); ++k) a(iv.targets[k]) = iv.values(k);
            const double gap = evaluate(fc, a) - evaluate(f, a);
            max_gap_sq = std::max(max_gap_sq, gap * gap);
        }
        CHECK(std::abs(r.worst_case - (0.25 + max_gap_sq)) <= 1e-12);
    }
}

TEST_CASE("monte carlo and exact risk agree within 4 stderr") {
    const Scm scm = make_chain2();
    const EnvironmentSet envs = make_env_grid(2, 2.0, 2);
    const long n = 100000;
    const RiskReport exact =
        worst_case_risk(kSumPredictor, scm, envs, RiskOptions{RiskMode::exact, 0, 0});
    const RiskReport mc = worst_case_risk(kSumPredictor, scm, envs,
                                          RiskOptions{RiskMode::monte_carlo, n, 17});
    const Predictor fc = causal_predictor(scm);
    for (int i = 0; i < envs.size(); ++i) {
        Eigen::VectorXd a(2);
        const Intervention& iv = envs.environments[i];
        for (std::size_t k = 0; k < iv.targets.size(); ++k) a(iv.targets[k]) = iv.values(k);
        const double gap = evaluate(fc, a) - evaluate(kSumPredictor, a);
        CHECK(std::abs(mc.per_env_risk[i] - exact.per_env_risk[i]) <=
              4.0 * oracle_risk_stderr(gap, 0.25, n));
    }
}

TEST_CASE("composed worst case through a flow mixer stays at the floor") {
    const Scm scm = make_chain2();
    const Mixer g = icrl::testing::random_flow_mixer(2, 42, 2, 4);
    const ComposedPredictor h{causal_predictor(scm), g};
    const RiskReport r = worst_case_risk(h, g, scm, make_env_grid(2, 2.0, 3),
                                         RiskOptions{RiskMode::exact, 0, 0});
    CHECK(std::abs(r.worst_case - 0.25) <= 1e-10);
}

TEST_CASE("decomposition diagnostics: causal predictor") {
    const Scm scm = make_chain2();
    const Intervention iv{{0, 1}, vec2(1.0, 1.0)};
    const DecompositionReport r =
        decomposition_diagnostics(causal_predictor(scm), scm, iv, 100000, 2718);
    CHECK(r.bias_sq == 0.0);
    CHECK(std::abs(r.noise - 0.25) <= 0.02);
    CHECK(r.cross == 0.0);  // gap is exactly zero
    CHECK(std::abs(r.total - r.direct_risk) <= 1e-12);
}

TEST_CASE("decomposition diagnostics: biased predictor") {
    const Scm scm = make_chain2();
    const Intervention iv{{0, 1}, vec2(1.0, 1.0)};
    const long n = 100000;
    const DecompositionReport r =
        decomposition_diagnostics(kSumPredictor, scm, iv, n, 977);
    CHECK(r.bias_sq == 1.0);
    CHECK(std::abs(r.cross) <= 0.02);  // 6 sigma = 6 * 2*0.5/sqrt(n) = 0.019
    CHECK(std::abs(r.noise - 0.25) <= 0.02);
    CHECK(std::abs(r.total - r.direct_risk) <=
          5.0 * oracle_risk_stderr(1.0, 0.25, n));
}

TEST_CASE("decomposition diagnostics: zero target noise is exact") {
    const Scm scm = make_chain2(1.0, 1.0, 0.0);
    const Intervention iv{{0, 1}, vec2(1.0, 1.0)};
    const DecompositionReport r = decomposition_diagnostics(kSumPredictor, scm, iv, 1000, 4);
    CHECK(r.noise == 0.0);
    CHECK(r.cross == 0.0);
    CHECK(r.total == 1.0);
    CHECK(r.direct_risk == 1.0);
}

TEST_CASE("decomposition requires full do") {
    const Scm scm = make_chain2();
    Eigen::VectorXd a(1);
    a << 1.0;
    CHECK_THROWS_AS(decomposition_diagnostics(kSumPredictor, scm, Intervention{{1}, a}, 10, 1),
                    NotFullSupport);
}

TEST_CASE("image restricted equality: identical predictors give zero gap") {
    const Mixer g = icrl::testing::random_flow_mixer(2, 66, 2, 3);
    const ComposedPredictor h{kSumPredictor, g};
    CHECK(image_restricted_equality(h, h, g, Box::symmetric(2, 2.0), 500, 1) == 0.0);
}

TEST_CASE("monte carlo reports do not depend on the thread cap") {
    const Scm scm = make_chain2();
    const EnvironmentSet envs = make_env_grid(2, 2.0, 3);
    const RiskOptions mc{RiskMode::monte_carlo, 2000, 99};

    setenv("ICRL_THREADS", "1", 1);
    const RiskReport serial = worst_case_risk(kSumPredictor, scm, envs, mc);
    setenv("ICRL_THREADS", "4", 1);
    const RiskReport parallel = worst_case_risk(kSumPredictor, scm, envs, mc);
    unsetenv("ICRL_THREADS");

    CHECK(serial.per_env_risk == parallel.per_env_risk);
    CHECK(serial.worst_case == parallel.worst_case);
    CHECK(serial.argmax_env == parallel.argmax_env);
}

TEST_CASE("predictor dimension mismatches are rejected") {
    Eigen::VectorXd z3(3);
    z3.setZero();
    CHECK_THROWS_AS(evaluate(kSumPredictor, z3), DimensionMismatch);
}

TEST_CASE("image restricted equality: a theta perturbation is visible at the corner") {
    const Mixer g{FlowMixer::identity(2)};
    const double half_width = 2.0;
    const ComposedPredictor h1{kSumPredictor, g};
    const ComposedPredictor h2{LinearPredictor{vec2(1.1, 1.0)}, g};
    const double gap = image_restricted_equality(h1, h2, g, Box::symmetric(2, half_width),
                                                 1000, 3);
    CHECK(gap >= 0.1 * half_width * (1.0 - 1e-6));
}
