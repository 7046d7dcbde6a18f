#include "icrl/counterexample.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace icrl {

namespace {

ReparamMap rotated_tail(const Eigen::VectorXd& theta, double exponent) {
    if (theta.size() < 2) {
        throw DimensionTooSmall("theorem2 construction requires d >= 2, got " +
                                std::to_string(theta.size()));
    }
    const Eigen::MatrixXd a = householder_to_e1(theta);  // throws ZeroVector
    ReparamMap psi = power_tail(static_cast<int>(theta.size()), exponent);
    psi.flow.layers.push_back(OrthogonalLayer{a.transpose()});
    return psi;
}

Box envelope_box(const EnvironmentSet& envs, int d) {
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());
    Eigen::VectorXd hi = -lo;
    for (const Intervention& iv : envs.environments) {
        for (std::size_t k = 0; k < iv.targets.size(); ++k) {
            const int j = iv.targets[k];
            lo(j) = std::min(lo(j), iv.values(static_cast<Eigen::Index>(k)));
            hi(j) = std::max(hi(j), iv.values(static_cast<Eigen::Index>(k)));
        }
    }
    for (int j = 0; j < d; ++j) {
        if (!std::isfinite(lo(j)) || !std::isfinite(hi(j)) || hi(j) - lo(j) < 1e-9) {
            lo(j) = -2.0;
            hi(j) = 2.0;
        }
    }
    return Box{lo, hi};
}

}  // namespace

SolutionPair theorem1_pair(const Scm& scm, const Mixer& g_causal, const ReparamMap& psi) {
    if (latent_dim(g_causal) != scm.d || psi.dim() != scm.d) {
        throw DimensionMismatch("theorem1_pair: scm, mixer and psi dimensions must agree");
    }
    SolutionPair pair;
    pair.psi = psi;
    pair.provenance =
        psi.flow.layers.empty() ? PairProvenance::identity : PairProvenance::theorem1;

    const Predictor fc = causal_predictor(scm);
    const ReparamMap psi_inv = psi.inverse();
    pair.f_hat = [fc, psi_inv](const Eigen::VectorXd& z) {
        return evaluate(fc, psi_inv.apply(z));
    };
    // unmix of g_causal ∘ psi⁻¹ evaluates psi(g_causal⁻¹(x)).
    pair.g_hat = compose(g_causal, psi_inv);
    return pair;
}

ReparamMap theorem2_psi(const Eigen::VectorXd& theta) { return rotated_tail(theta, 3.0); }

std::pair<ReparamMap, ReparamMap> free_subspace_witness(const Eigen::VectorXd& theta,
                                                        double alt_exponent) {
    if (alt_exponent == 3.0) {
        throw ExponentCollision("alt_exponent must differ from the cube tail's 3");
    }
    if (!(alt_exponent > 0.0)) {
        throw ValidationError("alt_exponent must be > 0");
    }
    return {rotated_tail(theta, 3.0), rotated_tail(theta, alt_exponent)};
}

NonIdentifiabilityReport demonstrate_non_identifiability(
    const Scm& scm, const Mixer& g_causal, const ReparamMap& psi,
    const EnvironmentSet& envs, long n, std::uint64_t seed, double risk_tolerance) {
    if (!envs.full_support(scm.d)) {
        throw NotFullSupport("demonstrate_non_identifiability needs full-support environments");
    }
    const long rows_per_env = std::max<long>(n, 1);

    NonIdentifiabilityReport report;
    report.risk_tolerance = risk_tolerance;

    // theorem2 orientation: f_hat = f_causal ∘ psi, g_hat = g_causal ∘ psi,
    // so the recovered latents are z_hat = psi⁻¹(z).
    SolutionPair pair = theorem1_pair(scm, g_causal, psi.inverse());
    pair.psi = psi;
    if (!psi.flow.layers.empty()) pair.provenance = PairProvenance::theorem2;

    const Predictor fc = causal_predictor(scm);
    const ComposedPredictor h_causal{fc, g_causal};
    const RiskOptions exact{RiskMode::exact, 0, 0};
    report.risk_causal = worst_case_risk(h_causal, g_causal, scm, envs, exact);
    report.risk_reparam = worst_case_risk(pair.composed(), g_causal, scm, envs, exact);
    report.risk_gap = std::abs(report.risk_causal.worst_case - report.risk_reparam.worst_case);

    // Latents pooled over all environments.
    const int d = scm.d;
    Eigen::MatrixXd z(rows_per_env * envs.size(), d);
    for (int i = 0; i < envs.size(); ++i) {
        z.middleRows(static_cast<Eigen::Index>(i) * rows_per_env, rows_per_env) =
            sample_environment(scm, envs, i, rows_per_env, seed).z;
    }
    const Eigen::MatrixXd z_hat = unmix(pair.g_hat, mix(g_causal, z));
    report.disentanglement = check_disentangled(z_hat, z);

    const Box box = envelope_box(envs, d);
    const int fit_points = 48 * d + 48;
    const std::uint64_t fit_seed = substream_seed(seed, 0x1DEA);
    report.psi_components.reserve(static_cast<std::size_t>(d));
    bool any_nonlinear = false;
    for (int j = 0; j < d; ++j) {
        LinearityReport lr = linearity_test(
            [&psi, j](const Eigen::VectorXd& v) { return psi.apply(v)(j); }, box, fit_points,
            fit_seed + static_cast<std::uint64_t>(j));
        any_nonlinear = any_nonlinear || !lr.linear;
        report.psi_components.push_back(std::move(lr));
    }
    report.psi_nonlinear = any_nonlinear;
    report.f_hat_linearity = linearity_test(pair.f_hat, box, fit_points, fit_seed + 7919);

    report.exhibited = report.risk_gap <= risk_tolerance && !report.disentanglement.verdict;
    return report;
}

std::string to_text(const NonIdentifiabilityReport& r) {
    std::ostringstream os;
    auto line = [&os](bool ok, const std::string& msg) {
        os << (ok ? "[PASS] " : "[FAIL] ") << msg << '\n';
    };
    line(r.risk_gap <= r.risk_tolerance,
         "worst-case risks indistinguishable: gap = " + std::to_string(r.risk_gap) +
             " (tolerance " + std::to_string(r.risk_tolerance) + ")");
    line(!r.disentanglement.verdict,
         "recovered latents not disentangled: mcc = " + std::to_string(r.disentanglement.mcc));
    os << "[INFO] psi nonlinear: " << (r.psi_nonlinear ? "true" : "false") << '\n';
    os << "[INFO] f_hat linear: " << (r.f_hat_linearity.linear ? "true" : "false")
       << " (max residual " << r.f_hat_linearity.max_abs_residual << ")\n";
    os << (r.exhibited ? "counterexample exhibited: equal-risk solution pair with "
                         "non-disentangled latents\n"
                       : "counterexample NOT exhibited\n");
    return os.str();
}

}  // namespace icrl
