// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion pins its tolerances in code.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "icrl/counterexample.hpp"
#include "icrl/experiment.hpp"
#include "icrl/serialize.hpp"

using namespace icrl;
using icrl::testing::make_chain2;

namespace {

namespace fs = std::filesystem;

const std::string kCli = ICRL_CLI_PATH;
const fs::path kSourceDir = ICRL_SOURCE_DIR;

struct Failures {
    std::vector<std::string> messages;

    void require(bool ok, const std::string& msg) {
        if (!ok) messages.push_back(msg);
    }
};

std::string fmt(double v) { return fmt_double(v); }

Eigen::VectorXd grid_point(const Intervention& iv, int d) {
    Eigen::VectorXd a(d);
    for (std::size_t k = 0; k < iv.targets.size(); ++k) {
        a(iv.targets[k]) = iv.values(static_cast<Eigen::Index>(k));
    }
    return a;
}

// ---------------------------------------------------------------- criterion 1
void criterion_lemma1_floor(Failures& f) {
    const Scm scm = make_chain2();
    const EnvironmentSet envs = make_env_grid(2, 2.0, 5);
    const Predictor fc = causal_predictor(scm);
    const RiskOptions exact{RiskMode::exact, 0, 0};

    const RiskReport floor = worst_case_risk(fc, scm, envs, exact);
    f.require(std::abs(floor.worst_case - 0.25) <= 1e-12,
              "worst_case(f_causal) = " + fmt(floor.worst_case) + ", expected 0.25");

    CounterRng rng = CounterRng::keyed(0xACC1, 0, 0);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd delta = icrl::testing::random_normal_vector(2, rng);
        if (delta.norm() < 1e-9) continue;
        delta *= (0.1 + 1.9 * rng.next_unit()) / delta.norm();  // ||theta' - theta|| >= 0.1
        Eigen::VectorXd theta(2);
        theta << 1.0, 2.0;
        const Predictor fprime = LinearPredictor{theta + delta};

        const RiskReport r = worst_case_risk(fprime, scm, envs, exact);
        double max_gap_sq = 0.0;
        for (const Intervention& iv : envs.environments) {
            const Eigen::VectorXd a = grid_point(iv, 2);
            const double gap = evaluate(fc, a) - evaluate(fprime, a);
            max_gap_sq = std::max(max_gap_sq, gap * gap);
        }
        f.require(std::abs(r.worst_case - (0.25 + max_gap_sq)) <= 1e-12,
                  "trial " + std::to_string(trial) + ": worst_case " + fmt(r.worst_case) +
                      " vs floor-plus-gap " + fmt(0.25 + max_gap_sq));
        f.require(r.worst_case >= 0.25 + max_gap_sq - 1e-12, "uniqueness bound violated");
    }
}

// ---------------------------------------------------------------- criterion 2
void criterion_cross_term(Failures& f) {
    const Scm scm = make_chain2();
    Eigen::VectorXd a(2);
    a << 1.0, 1.0;
    Eigen::VectorXd theta(2);
    theta << 1.0, 1.0;
    const DecompositionReport r = decomposition_diagnostics(
        LinearPredictor{theta}, scm, Intervention{{0, 1}, a}, 100000, 0xACC2);
    f.require(r.bias_sq == 1.0, "bias_sq = " + fmt(r.bias_sq) + ", expected exactly 1");
    f.require(std::abs(r.cross) <= 0.02, "|cross| = " + fmt(std::abs(r.cross)) + " > 0.02");
    f.require(std::abs(r.noise - 0.25) <= 0.02,
              "noise = " + fmt(r.noise) + " outside 0.25 +- 0.02");
}

// ---------------------------------------------------------------- criterion 3
void criterion_lemma2_image(Failures& f) {
    const Scm scm = make_chain2();
    CounterRng rng = CounterRng::keyed(0xACC3, 0, 0);

    FlowMixer flow;
    flow.dim = 2;
    flow.layers = {OrthogonalLayer{icrl::testing::random_orthogonal(2, rng)},
                   SignedPowerLayer{Eigen::VectorXd::Constant(2, 3.0)}};
    flow.embedding = LinearMixer::from_matrix(icrl::testing::random_embedding(4, 2, rng));
    const Mixer g{flow};

    const EnvironmentSet envs = make_env_grid(2, 2.0, 5);
    const RiskOptions exact{RiskMode::exact, 0, 0};
    const Predictor fc = causal_predictor(scm);

    const RiskReport floor = worst_case_risk(ComposedPredictor{fc, g}, g, scm, envs, exact);
    f.require(std::abs(floor.worst_case - 0.25) <= 1e-10,
              "worst_case(h_causal) = " + fmt(floor.worst_case) + ", expected 0.25");

    Eigen::VectorXd theta(2);
    theta << 1.3, 2.0;  // perturb the first coordinate by 0.3
    const ComposedPredictor h_prime{LinearPredictor{theta}, g};
    const RiskReport r = worst_case_risk(h_prime, g, scm, envs, exact);

    double expected_worst = 0.0;
    int witness = 0;
    for (int i = 0; i < envs.size(); ++i) {
        const Eigen::VectorXd a = grid_point(envs.environments[i], 2);
        const double gap = -0.3 * a(0);
        if (gap * gap + 0.25 > expected_worst) {
            expected_worst = gap * gap + 0.25;
            witness = i;
        }
    }
    f.require(std::abs(r.worst_case - expected_worst) <= 1e-8,
              "perturbed worst_case " + fmt(r.worst_case) + " vs closed form " +
                  fmt(expected_worst));
    f.require(std::abs(r.per_env_risk[witness] - r.worst_case) <= 1e-8,
              "closed-form witness grid point does not attain the maximum");
    f.require(std::abs(grid_point(envs.environments[r.argmax_env], 2)(0)) == 2.0,
              "argmax environment is not on the |a1| = 2 boundary");
}

// ---------------------------------------------------------------- criterion 4
void criterion_theorem1(Failures& f) {
    const Scm scm = make_chain2();
    const Mixer g{FlowMixer::identity(2)};
    const EnvironmentSet envs = make_env_grid(2, 2.0, 5);
    const SolutionPair pair = theorem1_pair(scm, g, cube_tail(2));

    const RiskOptions exact{RiskMode::exact, 0, 0};
    const RiskReport rc =
        worst_case_risk(ComposedPredictor{causal_predictor(scm), g}, g, scm, envs, exact);
    const RiskReport rr = worst_case_risk(pair.composed(), g, scm, envs, exact);
    f.require(std::abs(rc.worst_case - rr.worst_case) <= 1e-10,
              "risk difference " + fmt(std::abs(rc.worst_case - rr.worst_case)));

    Eigen::MatrixXd z(envs.size() * 40, 2);
    for (int i = 0; i < envs.size(); ++i) {
        z.middleRows(static_cast<Eigen::Index>(i) * 40, 40) =
            sample_environment(scm, envs, i, 40, 0xACC4).z;
    }
    const Eigen::MatrixXd z_hat = unmix(pair.g_hat, mix(g, z));
    const DisentanglementReport rep = check_disentangled(z_hat, z);
    f.require(!rep.verdict, "cube-tail latents wrongly judged disentangled");
    f.require(rep.mcc < 0.999, "mcc = " + fmt(rep.mcc) + ", expected < 0.999");
}

// ---------------------------------------------------------------- criterion 5
void criterion_theorem2(Failures& f) {
    CounterRng rng = CounterRng::keyed(0xACC5, 0, 0);
    const int dims[] = {2, 3, 5};
    int trial = 0;
    for (int block = 0; block < 100; ++block) {
        const int d = dims[block % 3];
        Eigen::VectorXd theta = icrl::testing::random_normal_vector(d, rng);
        if (theta.norm() < 1e-9) continue;
        const double magnitude = std::pow(10.0, -1.0 + 2.0 * rng.next_unit());  // [0.1, 10]
        theta *= magnitude / theta.norm();
        ++trial;

        const ReparamMap psi = theorem2_psi(theta);
        const Box box = Box::symmetric(d, 2.0);
        const std::uint64_t seed = 0xACC5 + static_cast<std::uint64_t>(block);

        const LinearityReport lr = linearity_test(
            [&](const Eigen::VectorXd& z) { return theta.dot(psi.apply(z)); }, box, 60 * d,
            seed);
        f.require(lr.max_abs_residual <= 1e-9,
                  "f_hat residual " + fmt(lr.max_abs_residual) + " at trial " +
                      std::to_string(trial));
        Eigen::VectorXd expected = Eigen::VectorXd::Zero(d);
        expected(0) = theta.norm();
        f.require((lr.coefficients - expected).cwiseAbs().maxCoeff() <= 1e-8 &&
                      std::abs(lr.intercept) <= 1e-8,
                  "fitted slope is not ||theta|| e1 at trial " + std::to_string(trial));

        double psi_max_residual = 0.0;
        for (int j = 0; j < d; ++j) {
            const LinearityReport comp = linearity_test(
                [&](const Eigen::VectorXd& z) { return psi.apply(z)(j); }, box, 60 * d,
                seed + 17 + static_cast<std::uint64_t>(j));
            psi_max_residual = std::max(psi_max_residual, comp.max_abs_residual);
        }
        f.require(psi_max_residual >= 0.5,
                  "psi max component residual " + fmt(psi_max_residual) + " < 0.5 at trial " +
                      std::to_string(trial));

        const auto [psi_a, psi_b] = free_subspace_witness(theta, 5.0);
        double f_gap = 0.0, map_gap = 0.0;
        for (int i = 0; i < 100; ++i) {
            const Eigen::VectorXd z = box.sample(seed + 71, static_cast<std::uint64_t>(i));
            const Eigen::VectorXd wa = psi_a.apply(z);
            const Eigen::VectorXd wb = psi_b.apply(z);
            f_gap = std::max(f_gap, std::abs(theta.dot(wa) - theta.dot(wb)));
            map_gap = std::max(map_gap, (wa - wb).cwiseAbs().maxCoeff());
        }
        f.require(f_gap <= 1e-9, "witness f_hat gap " + fmt(f_gap) + " at trial " +
                                     std::to_string(trial));
        f.require(map_gap > 1e-6, "witness maps coincide at trial " + std::to_string(trial));
    }
    f.require(trial >= 100, "fewer than 100 random thetas exercised");
}

// ---------------------------------------------------------------- criterion 6
void criterion_round_trips(Failures& f) {
    // (a) unmix-mix identity for 20 random mixers
    for (int k = 0; k < 20; ++k) {
        const int d = 1 + k % 5;
        const Mixer m = icrl::testing::random_flow_mixer(
            d, 0xACC6 + static_cast<std::uint64_t>(k), 1 + k % 4, k % 2 == 0 ? d + 2 : 0);
        CounterRng rng = CounterRng::keyed(0xACC6, static_cast<std::uint64_t>(k), 1);
        double worst = 0.0;
        for (int i = 0; i < 10000; ++i) {
            Eigen::VectorXd z(d);
            for (int j = 0; j < d; ++j) z(j) = 10.0 * rng.next_symmetric();
            worst = std::max(worst, (unmix(m, mix(m, z)) - z).cwiseAbs().maxCoeff());
        }
        f.require(worst <= 1e-9,
                  "mixer " + std::to_string(k) + " round-trip error " + fmt(worst));
    }

    // (b) optimized assignment vs exhaustive search, d <= 4
    CounterRng rng = CounterRng::keyed(0xACC7, 0, 0);
    for (int inst = 0; inst < 200; ++inst) {
        const int d = 2 + inst % 3;  // 2, 3, 4
        Eigen::MatrixXd score(d, d);
        for (int r = 0; r < d; ++r) {
            for (int c = 0; c < d; ++c) score(r, c) = rng.next_unit();
        }
        const std::vector<int> ex = assignment_exhaustive(score);
        const std::vector<int> opt = assignment_optimize(score);
        double total_ex = 0.0, total_opt = 0.0;
        for (int i = 0; i < d; ++i) {
            total_ex += score(i, ex[static_cast<std::size_t>(i)]);
            total_opt += score(i, opt[static_cast<std::size_t>(i)]);
        }
        f.require(std::abs(total_ex - total_opt) <= 1e-12 && ex == opt,
                  "assignment mismatch on instance " + std::to_string(inst));
    }

    // (c) Monte-Carlo vs exact risk within 4 standard errors at n = 1e5
    const Scm scm = make_chain2();
    const Predictor fc = causal_predictor(scm);
    const long n = 100000;
    for (int pair_i = 0; pair_i < 20; ++pair_i) {
        Eigen::VectorXd theta(2), a(2);
        theta << 1.0 + rng.next_symmetric(), 2.0 + rng.next_symmetric();
        a << 2.0 * rng.next_symmetric(), 2.0 * rng.next_symmetric();
        const Predictor fp = LinearPredictor{theta};

        EnvironmentSet envs;
        envs.environments = {Intervention{{0, 1}, a}};
        envs.labels = {"mc"};
        const RiskReport mc = worst_case_risk(
            fp, scm, envs,
            RiskOptions{RiskMode::monte_carlo, n, 0xACC8 + static_cast<std::uint64_t>(pair_i)});
        const double exact = exact_do_risk(fp, scm, a);
        const double gap = evaluate(fc, a) - evaluate(fp, a);
        const double tol = 4.0 * icrl::testing::oracle_risk_stderr(gap, 0.25, n);
        f.require(std::abs(mc.worst_case - exact) <= tol,
                  "pair " + std::to_string(pair_i) + ": |mc - exact| = " +
                      fmt(std::abs(mc.worst_case - exact)) + " > " + fmt(tol));
    }
}

// ---------------------------------------------------------------- criterion 7
void criterion_pooled_fit(Failures& f) {
    const Scm scm = make_chain2();
    const EnvironmentSet envs = make_env_grid(2, 2.0, 3);
    const long n = 10000;
    std::vector<Dataset> datasets;
    std::vector<Eigen::MatrixXd> xs;
    for (int i = 0; i < envs.size(); ++i) {
        datasets.push_back(sample_environment(scm, envs, i, n, 0xACC9));
        xs.push_back(datasets.back().z);  // identity mixing
    }
    const PooledLinearFit fit = fit_pooled_linear(datasets, xs);

    Eigen::MatrixXd design(fit.n_total, 3);
    Eigen::Index row = 0;
    for (const Dataset& ds : datasets) {
        design.block(row, 0, ds.n(), 1).setOnes();
        design.block(row, 1, ds.n(), 2) = ds.z;
        row += ds.n();
    }
    const Eigen::MatrixXd cov = fit.residual_variance * (design.transpose() * design).inverse();
    f.require(std::abs(fit.beta(0) - 1.0) <= 3.0 * std::sqrt(cov(1, 1)),
              "beta1 = " + fmt(fit.beta(0)) + " is off by more than 3 stderr");
    f.require(std::abs(fit.beta(1) - 2.0) <= 3.0 * std::sqrt(cov(2, 2)),
              "beta2 = " + fmt(fit.beta(1)) + " is off by more than 3 stderr");
    f.require(std::abs(fit.residual_variance - 0.25) <= 0.05 * 0.25,
              "residual variance " + fmt(fit.residual_variance) + " outside 5% of 0.25");
}

// ---------------------------------------------------------------- criterion 8
int run_cli(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

nlohmann::json read_report_without_clock(const fs::path& p) {
    nlohmann::json j = parse_json_file(p);
    j.erase("wall_clock_seconds");
    return j;
}

void criterion_cli(Failures& f) {
    const fs::path pass_fixture = kSourceDir / "scenarios" / "chain2_theorem1.json";
    const fs::path fail_fixture = kSourceDir / "scenarios" / "chain2_theorem1_identity.json";
    const fs::path out_a = fs::temp_directory_path() / "icrl_acc_run_a";
    const fs::path out_b = fs::temp_directory_path() / "icrl_acc_run_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);

    f.require(run_cli("run " + pass_fixture.string() + " --out " + out_a.string() +
                      " --quiet") == 0,
              "pass fixture should exit 0");
    f.require(run_cli("run " + pass_fixture.string() + " --out " + out_b.string() +
                      " --quiet") == 0,
              "second run should exit 0");
    f.require(read_report_without_clock(out_a / "report.json") ==
                  read_report_without_clock(out_b / "report.json"),
              "reports differ beyond the wall clock");

    f.require(run_cli("run " + fail_fixture.string() + " --out " + out_a.string() +
                      " --quiet") == 1,
              "failing fixture should exit 1");
    f.require(run_cli("run /nonexistent/missing.json --out " + out_a.string()) == 2,
              "missing scenario should exit 2");

    const fs::path malformed = fs::temp_directory_path() / "icrl_acc_malformed.json";
    std::ofstream(malformed) << "{ not json";
    f.require(run_cli("run " + malformed.string() + " --out " + out_a.string()) == 2,
              "malformed scenario should exit 2");
    f.require(run_cli("run " + pass_fixture.string()) == 2, "missing --out should exit 2");
}

struct CriterionSpec {
    std::string name;
    std::function<void(Failures&)> fn;
    double budget_seconds;
};

int run_all() {
    using Clock = std::chrono::steady_clock;
    const std::vector<CriterionSpec> criteria = {
        {"1 lemma1 floor and uniqueness (exact mode)", criterion_lemma1_floor, 5.0},
        {"2 cross-term vanishing in the risk decomposition", criterion_cross_term, 5.0},
        {"3 composed floor on the mixer image", criterion_lemma2_image, 10.0},
        {"4 equal-risk reparametrized pair is not disentangled", criterion_theorem1, 10.0},
        {"5 linearity-preserving nonlinear reparametrization", criterion_theorem2, 30.0},
        {"6 round trips and oracle agreement", criterion_round_trips, 60.0},
        {"7 pooled linear baseline", criterion_pooled_fit, 10.0},
        {"8 CLI determinism and exit codes", criterion_cli, 60.0},
    };

    int failures = 0;
    for (const auto& [name, fn, budget] : criteria) {
        Failures f;
        const auto start = Clock::now();
        try {
            fn(f);
        } catch (const std::exception& e) {
            f.messages.push_back(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        if (secs > budget) {
            f.messages.push_back("runtime " + std::to_string(secs) + "s over the " +
                                 std::to_string(budget) + "s budget");
        }
        std::ostringstream line;
        line << (f.messages.empty() ? "[PASS] " : "[FAIL] ") << "criterion " << name << " ("
             << secs << "s)";
        std::cout << line.str() << '\n';
        for (const std::string& msg : f.messages) std::cout << "       " << msg << '\n';
        failures += f.messages.empty() ? 0 : 1;
    }
    std::cout << (failures == 0 ? "acceptance: all criteria passed"
                                : "acceptance: " + std::to_string(failures) +
                                      " criterion(s) FAILED")
              << '\n';
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main() { return run_all(); }
