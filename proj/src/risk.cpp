#include "icrl/risk.hpp"

#include <cmath>

namespace icrl {

namespace {

Eigen::VectorXd full_do_point(const Intervention& iv, int d) {
    if (!iv.full_support(d)) {
        throw NotFullSupport("environment leaves some Z unintervened; the closed form "
                             "requires a full do-intervention");
    }
    Eigen::VectorXd a(d);
    for (std::size_t k = 0; k < iv.targets.size(); ++k) {
        a(iv.targets[k]) = iv.values(static_cast<Eigen::Index>(k));
    }
    return a;
}

double evaluate_fn(const std::variant<Predictor, ScalarFn>& f, const Eigen::VectorXd& z) {
    if (const auto* p = std::get_if<Predictor>(&f)) return evaluate(*p, z);
    return std::get<ScalarFn>(f)(z);
}

std::vector<std::string> labels_or_default(const EnvironmentSet& envs) {
    if (envs.labels.size() == envs.environments.size()) return envs.labels;
    std::vector<std::string> out;
    out.reserve(envs.environments.size());
    for (std::size_t i = 0; i < envs.environments.size(); ++i) {
        out.push_back("e" + std::to_string(i));
    }
    return out;
}

RiskReport assemble_report(std::vector<double> per_env, const Scm& scm,
                           const EnvironmentSet& envs, const RiskOptions& options) {
    RiskReport report;
    report.per_env_risk = std::move(per_env);
    report.env_labels = labels_or_default(envs);
    report.noise_floor = scm.noise_floor();
    report.a_max = envs.max_abs_value();
    report.mode = options.mode;
    report.n = options.mode == RiskMode::monte_carlo ? options.n : 0;
    report.seed = options.mode == RiskMode::monte_carlo ? options.seed : 0;
    report.argmax_env = 0;
    report.worst_case = report.per_env_risk.empty() ? 0.0 : report.per_env_risk[0];
    for (std::size_t i = 1; i < report.per_env_risk.size(); ++i) {
        if (report.per_env_risk[i] > report.worst_case) {
            report.worst_case = report.per_env_risk[i];
            report.argmax_env = static_cast<int>(i);
        }
    }
    return report;
}

void check_envs(const EnvironmentSet& envs, const RiskOptions& options, int d) {
    if (envs.environments.empty()) {
        throw ValidationError("worst_case_risk: environment set is empty");
    }
    if (options.mode == RiskMode::exact && !envs.full_support(d)) {
        throw NotFullSupport("exact mode requires a full-support environment set");
    }
    if (options.mode == RiskMode::monte_carlo && options.n < 1) {
        throw ValidationError("worst_case_risk: monte_carlo mode needs n >= 1");
    }
}

}  // namespace

double evaluate(const Predictor& f, const Eigen::VectorXd& z) {
    if (const auto* lin = std::get_if<LinearPredictor>(&f)) {
        if (lin->theta.size() != z.size()) {
            throw DimensionMismatch("predictor: theta has length " +
                                    std::to_string(lin->theta.size()) + ", z has " +
                                    std::to_string(z.size()));
        }
        return lin->theta.dot(z);
    }
    const auto& basis = std::get<BasisPredictor>(f);
    if (basis.dim != static_cast<int>(z.size())) {
        throw DimensionMismatch("predictor: expects dim " + std::to_string(basis.dim) +
                                ", z has " + std::to_string(z.size()));
    }
    double out = 0.0;
    for (const BasisTerm& t : basis.terms) {
        double prod = t.coefficient;
        for (const BasisFactor& fac : t.factors) {
            const double v = z(fac.index);
            if (fac.kind == FactorKind::power) {
                double p = 1.0;
                for (int e = 0; e < fac.exponent; ++e) p *= v;
                prod *= p;
            } else {
                prod *= std::tanh(v);
            }
        }
        out += prod;
    }
    return out;
}

Eigen::VectorXd evaluate(const Predictor& f, const Eigen::MatrixXd& z_rows) {
    if (const auto* lin = std::get_if<LinearPredictor>(&f)) {
        if (lin->theta.size() != z_rows.cols()) {
            throw DimensionMismatch("predictor: theta/z column mismatch");
        }
        return z_rows * lin->theta;
    }
    Eigen::VectorXd out(z_rows.rows());
    for (Eigen::Index r = 0; r < z_rows.rows(); ++r) {
        out(r) = evaluate(f, Eigen::VectorXd(z_rows.row(r)));
    }
    return out;
}

int predictor_dim(const Predictor& f) {
    if (const auto* lin = std::get_if<LinearPredictor>(&f)) {
        return static_cast<int>(lin->theta.size());
    }
    return std::get<BasisPredictor>(f).dim;
}

Predictor causal_predictor(const Scm& scm) {
    const Mechanism& m = scm.target_mechanism;
    if (m.form == MechanismForm::linear) {
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(scm.d);
        for (std::size_t j = 0; j < m.parents.size(); ++j) {
            theta(m.parents[j]) = m.coefficients(static_cast<Eigen::Index>(j));
        }
        return LinearPredictor{theta};
    }
    BasisPredictor basis;
    basis.dim = scm.d;
    basis.terms = m.terms;
    for (BasisTerm& t : basis.terms) {
        for (BasisFactor& fac : t.factors) {
            fac.index = m.parents[static_cast<std::size_t>(fac.index)];
        }
    }
    return basis;
}

double ComposedPredictor::operator()(const Eigen::VectorXd& x) const {
    return evaluate_fn(f, unmix(unmixer, x));
}

double ComposedPredictor::evaluate_latent(const Eigen::VectorXd& z) const {
    return evaluate_fn(f, z);
}

// Row-by-row accumulation, in the same order as the composed-predictor
// overload: with an identity mixer the two must agree bit for bit.
double empirical_risk(const Predictor& f, const Dataset& data) {
    double sum = 0.0;
    for (Eigen::Index r = 0; r < data.z.rows(); ++r) {
        const double e = data.y(r) - evaluate(f, Eigen::VectorXd(data.z.row(r)));
        sum += e * e;
    }
    return sum / static_cast<double>(data.z.rows());
}

double empirical_risk(const ComposedPredictor& h, const Dataset& data,
                      const Eigen::MatrixXd& x) {
    if (x.rows() != data.z.rows()) {
        throw DimensionMismatch("empirical_risk: observation rows " + std::to_string(x.rows()) +
                                " != dataset rows " + std::to_string(data.z.rows()));
    }
    double sum = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double e = data.y(r) - h(Eigen::VectorXd(x.row(r)));
        sum += e * e;
    }
    return sum / static_cast<double>(x.rows());
}

double exact_do_risk(const Predictor& f, const Scm& scm, const Eigen::VectorXd& a) {
    if (a.size() != scm.d) {
        throw DimensionMismatch("exact_do_risk: a has length " + std::to_string(a.size()) +
                                ", d = " + std::to_string(scm.d));
    }
    const double gap = evaluate(causal_predictor(scm), a) - evaluate(f, a);
    return gap * gap + scm.noise_floor();
}

double exact_do_risk(const Predictor& f, const Scm& scm, const Intervention& iv) {
    return exact_do_risk(f, scm, full_do_point(iv, scm.d));
}

RiskReport worst_case_risk(const Predictor& f, const Scm& scm,
                           const EnvironmentSet& envs, const RiskOptions& options) {
    check_envs(envs, options, scm.d);
    const int count = envs.size();
    std::vector<double> per_env(static_cast<std::size_t>(count), 0.0);

    if (options.mode == RiskMode::exact) {
        const Predictor fc = causal_predictor(scm);
        for (int i = 0; i < count; ++i) {
            const Eigen::VectorXd a =
                full_do_point(envs.environments[static_cast<std::size_t>(i)], scm.d);
            const double gap = evaluate(fc, a) - evaluate(f, a);
            per_env[static_cast<std::size_t>(i)] = gap * gap + scm.noise_floor();
        }
    } else {
        parallel_for_index(count, [&](int i) {
            const Dataset ds = sample_environment(scm, envs, i, options.n, options.seed);
            per_env[static_cast<std::size_t>(i)] = empirical_risk(f, ds);
        });
    }
    return assemble_report(std::move(per_env), scm, envs, options);
}

RiskReport worst_case_risk(const ComposedPredictor& h, const Mixer& data_mixer,
                           const Scm& scm, const EnvironmentSet& envs,
                           const RiskOptions& options) {
    if (latent_dim(data_mixer) != scm.d) {
        throw DimensionMismatch("worst_case_risk: mixer latent dim != scm d");
    }
    check_envs(envs, options, scm.d);
    const int count = envs.size();
    std::vector<double> per_env(static_cast<std::size_t>(count), 0.0);

    if (options.mode == RiskMode::exact) {
        const Predictor fc = causal_predictor(scm);
        for (int i = 0; i < count; ++i) {
            const Eigen::VectorXd a =
                full_do_point(envs.environments[static_cast<std::size_t>(i)], scm.d);
            const double gap = evaluate(fc, a) - h(mix(data_mixer, a));
            per_env[static_cast<std::size_t>(i)] = gap * gap + scm.noise_floor();
        }
    } else {
        parallel_for_index(count, [&](int i) {
            const Dataset ds = sample_environment(scm, envs, i, options.n, options.seed);
            const Eigen::MatrixXd x = mix(data_mixer, ds.z);
            per_env[static_cast<std::size_t>(i)] = empirical_risk(h, ds, x);
        });
    }
    return assemble_report(std::move(per_env), scm, envs, options);
}

DecompositionReport decomposition_diagnostics(const Predictor& f, const Scm& scm,
                                              const Intervention& env, long n,
                                              std::uint64_t seed) {
    if (n < 1) throw ValidationError("decomposition_diagnostics: n must be >= 1");
    const Eigen::VectorXd a = full_do_point(env, scm.d);

    const SampleWithNoise sw = sample_with_noise(apply_intervention(scm, env), n, seed);
    const Eigen::VectorXd eps = sw.noise.col(scm.d);

    DecompositionReport report;
    report.n = n;
    const double gap = evaluate(causal_predictor(scm), a) - evaluate(f, a);
    report.bias_sq = gap * gap;  // exact: Z is the constant a under full do
    report.noise = eps.squaredNorm() / static_cast<double>(n);
    report.cross = 2.0 * gap * eps.mean();
    report.total = report.bias_sq + report.noise + report.cross;
    report.direct_risk = empirical_risk(f, sw.data);
    return report;
}

double image_restricted_equality(const ComposedPredictor& h1, const ComposedPredictor& h2,
                                 const Mixer& g_ref, const Box& box, int n_points,
                                 std::uint64_t seed) {
    if (n_points < 1) throw ValidationError("image_restricted_equality: n_points must be >= 1");
    if (box.dim() != latent_dim(g_ref)) {
        throw DimensionMismatch("image_restricted_equality: box/mixer dimension mismatch");
    }
    const int d = box.dim();
    const std::uint64_t corners =
        d < 30 ? std::min<std::uint64_t>(1ULL << d, static_cast<std::uint64_t>(n_points)) : 0;

    double max_gap = 0.0;
    for (int i = 0; i < n_points; ++i) {
        const Eigen::VectorXd z = static_cast<std::uint64_t>(i) < corners
                                      ? box.corner(static_cast<std::uint64_t>(i))
                                      : box.sample(seed, static_cast<std::uint64_t>(i));
        const Eigen::VectorXd x = mix(g_ref, z);
        max_gap = std::max(max_gap, std::abs(h1(x) - h2(x)));
    }
    return max_gap;
}

}  // namespace icrl
