#include "icrl/scm.hpp"

#include <cmath>
#include <queue>
#include <sstream>
#include <unordered_set>

namespace icrl {

namespace {

double ipow(double v, int e) {
    double out = 1.0;
    for (int i = 0; i < e; ++i) out *= v;
    return out;
}

void check_mechanism(const Mechanism& m, int d, int own_index, const std::string& who) {
    std::unordered_set<int> seen;
    for (int p : m.parents) {
        if (p < 0 || p >= d) {
            throw BadParentIndex(who + ": parent index " + std::to_string(p + 1) +
                                 " outside [1, " + std::to_string(d) + "]");
        }
        if (p == own_index) {
            throw BadParentIndex(who + ": variable listed as its own parent");
        }
        if (!seen.insert(p).second) {
            throw BadParentIndex(who + ": duplicate parent index " + std::to_string(p + 1));
        }
    }
    if (m.form == MechanismForm::linear) {
        if (m.coefficients.size() != static_cast<Eigen::Index>(m.parents.size())) {
            throw ValidationError(who + ": linear coefficient count " +
                                  std::to_string(m.coefficients.size()) + " != parent count " +
                                  std::to_string(m.parents.size()));
        }
    } else {
        for (const BasisTerm& t : m.terms) {
            for (const BasisFactor& f : t.factors) {
                if (f.index < 0 || f.index >= static_cast<int>(m.parents.size())) {
                    throw BadParentIndex(who + ": basis factor references parent slot " +
                                         std::to_string(f.index) + " of " +
                                         std::to_string(m.parents.size()));
                }
                if (f.kind == FactorKind::power && f.exponent < 0) {
                    throw ValidationError(who + ": negative exponent in basis term");
                }
            }
        }
    }
    if (!(m.noise.variance >= 0.0)) {
        throw ValidationError(who + ": noise variance must be >= 0");
    }
}

std::string label_for(const Eigen::VectorXd& a, int index) {
    std::ostringstream os;
    os << "e" << index << ":do(";
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (i) os << ';';
        os << a(i);
    }
    os << ')';
    return os.str();
}

}  // namespace

double draw_noise(const NoiseSpec& spec, CounterRng rng) {
    if (spec.variance == 0.0) return 0.0;
    switch (spec.family) {
        case NoiseFamily::gaussian:
            return std::sqrt(spec.variance) * rng.next_normal();
        case NoiseFamily::uniform:
            return std::sqrt(3.0 * spec.variance) * rng.next_symmetric();
        case NoiseFamily::laplace:
            return std::sqrt(spec.variance / 2.0) * rng.next_laplace_unit();
    }
    return 0.0;
}

double Mechanism::evaluate(const Eigen::VectorXd& z) const {
    if (form == MechanismForm::linear) {
        double out = 0.0;
        for (std::size_t j = 0; j < parents.size(); ++j) {
            out += coefficients(static_cast<Eigen::Index>(j)) * z(parents[j]);
        }
        return out;
    }
    double out = 0.0;
    for (const BasisTerm& t : terms) {
        double prod = t.coefficient;
        for (const BasisFactor& f : t.factors) {
            const double v = z(parents[static_cast<std::size_t>(f.index)]);
            prod *= f.kind == FactorKind::power ? ipow(v, f.exponent) : std::tanh(v);
        }
        out += prod;
    }
    return out;
}

Mechanism Mechanism::constant(double value, const NoiseSpec& noise) {
    Mechanism m;
    m.form = MechanismForm::basis;
    m.terms = {BasisTerm{value, {}}};
    m.noise = noise;
    return m;
}

Mechanism Mechanism::linear(std::vector<int> parents, Eigen::VectorXd coefficients,
                            const NoiseSpec& noise) {
    Mechanism m;
    m.parents = std::move(parents);
    m.form = MechanismForm::linear;
    m.coefficients = std::move(coefficients);
    m.noise = noise;
    return m;
}

bool EnvironmentSet::full_support(int d) const {
    if (environments.empty()) return false;
    for (const Intervention& iv : environments) {
        if (!iv.full_support(d)) return false;
    }
    return true;
}

double EnvironmentSet::max_abs_value() const {
    double out = 0.0;
    for (const Intervention& iv : environments) {
        if (iv.values.size() > 0) out = std::max(out, iv.values.cwiseAbs().maxCoeff());
    }
    return out;
}

std::vector<int> validate(const Scm& scm) {
    if (scm.d < 1) throw ValidationError("scm: d must be >= 1");
    if (static_cast<int>(scm.latent_mechanisms.size()) != scm.d) {
        throw ValidationError("scm: expected " + std::to_string(scm.d) +
                              " latent mechanisms, got " +
                              std::to_string(scm.latent_mechanisms.size()));
    }
    for (int i = 0; i < scm.d; ++i) {
        check_mechanism(scm.latent_mechanisms[static_cast<std::size_t>(i)], scm.d, i,
                        "Z" + std::to_string(i + 1));
    }
    // Y's parents live in [0, d), so Y cannot be anyone's parent.
    check_mechanism(scm.target_mechanism, scm.d, -1, "Y");

    // Kahn's algorithm over latents + Y (node d), smallest index first. The
    // min-heap tie-break also guarantees Y is emitted last.
    const int nodes = scm.d + 1;
    std::vector<std::vector<int>> children(static_cast<std::size_t>(nodes));
    std::vector<int> indegree(static_cast<std::size_t>(nodes), 0);
    auto add_edges = [&](const Mechanism& m, int child) {
        for (int p : m.parents) {
            children[static_cast<std::size_t>(p)].push_back(child);
            ++indegree[static_cast<std::size_t>(child)];
        }
    };
    for (int i = 0; i < scm.d; ++i) add_edges(scm.latent_mechanisms[static_cast<std::size_t>(i)], i);
    add_edges(scm.target_mechanism, scm.d);

    std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
    for (int v = 0; v < nodes; ++v) {
        if (indegree[static_cast<std::size_t>(v)] == 0) ready.push(v);
    }
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(nodes));
    while (!ready.empty()) {
        const int v = ready.top();
        ready.pop();
        order.push_back(v);
        for (int c : children[static_cast<std::size_t>(v)]) {
            if (--indegree[static_cast<std::size_t>(c)] == 0) ready.push(c);
        }
    }
    if (static_cast<int>(order.size()) != nodes) {
        throw CyclicGraph("scm: latent graph admits no topological order");
    }
    return order;
}

Scm apply_intervention(const Scm& scm, const Intervention& iv) {
    if (iv.values.size() != static_cast<Eigen::Index>(iv.targets.size())) {
        throw ValidationError("intervention: " + std::to_string(iv.targets.size()) +
                              " targets but " + std::to_string(iv.values.size()) + " values");
    }
    std::unordered_set<int> seen;
    Scm out = scm;
    for (std::size_t k = 0; k < iv.targets.size(); ++k) {
        const int j = iv.targets[k];
        if (j < 0 || j >= scm.d) {
            throw TargetOutOfRange("intervention target Z" + std::to_string(j + 1) +
                                   " outside [1, " + std::to_string(scm.d) + "]");
        }
        if (!seen.insert(j).second) {
            throw ValidationError("intervention: duplicate target Z" + std::to_string(j + 1));
        }
        out.latent_mechanisms[static_cast<std::size_t>(j)] =
            Mechanism::constant(iv.values(static_cast<Eigen::Index>(k)));
    }
    return out;
}

SampleWithNoise sample_with_noise(const Scm& scm, long n, std::uint64_t seed) {
    const std::vector<int> order = validate(scm);
    const int d = scm.d;

    SampleWithNoise out;
    out.data.z.resize(n, d);
    out.data.y.resize(n);
    out.data.env_index = -1;
    out.data.seed = seed;
    out.noise.resize(n, d + 1);

    Eigen::VectorXd zr(d);
    for (long r = 0; r < n; ++r) {
        // Fixed per-variable streams: intervening on one variable can never
        // shift another variable's draws.
        for (int v = 0; v < d; ++v) {
            out.noise(r, v) = draw_noise(scm.latent_mechanisms[static_cast<std::size_t>(v)].noise,
                                         CounterRng::keyed(seed, static_cast<std::uint64_t>(r),
                                                           static_cast<std::uint64_t>(v)));
        }
        out.noise(r, d) = draw_noise(scm.target_mechanism.noise,
                                     CounterRng::keyed(seed, static_cast<std::uint64_t>(r),
                                                       static_cast<std::uint64_t>(d)));
        for (int node : order) {
            if (node < d) {
                zr(node) = scm.latent_mechanisms[static_cast<std::size_t>(node)].evaluate(zr) +
                           out.noise(r, node);
            } else {
                out.data.y(r) = scm.target_mechanism.evaluate(zr) + out.noise(r, d);
            }
        }
        out.data.z.row(r) = zr.transpose();
    }
    return out;
}

Dataset sample(const Scm& scm, long n, std::uint64_t seed) {
    return sample_with_noise(scm, n, seed).data;
}

Dataset sample_environment(const Scm& scm, const EnvironmentSet& envs, int env_index,
                           long n, std::uint64_t seed) {
    if (env_index < 0 || env_index >= envs.size()) {
        throw EnvIndexOutOfRange("environment index " + std::to_string(env_index) +
                                 " outside [0, " + std::to_string(envs.size()) + ")");
    }
    const Intervention& iv = envs.environments[static_cast<std::size_t>(env_index)];
    Dataset out = sample(apply_intervention(scm, iv), n,
                         substream_seed(seed, static_cast<std::uint64_t>(env_index)));
    out.env_index = env_index;
    return out;
}

EnvironmentSet make_env_grid(int d, double a_max, int k, std::uint64_t cap) {
    if (d < 1) throw ValidationError("env grid: d must be >= 1");
    if (k < 1) throw ValidationError("env grid: k must be >= 1");
    if (!(a_max > 0.0)) throw ValidationError("env grid: a_max must be > 0");

    std::uint64_t total = 1;
    for (int i = 0; i < d; ++i) {
        if (total > cap / static_cast<std::uint64_t>(k)) {
            throw GridTooLarge("env grid: k^d exceeds cap " + std::to_string(cap));
        }
        total *= static_cast<std::uint64_t>(k);
    }

    std::vector<double> axis(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        axis[static_cast<std::size_t>(j)] =
            k == 1 ? 0.0 : -a_max + 2.0 * a_max * static_cast<double>(j) / (k - 1);
    }

    EnvironmentSet envs;
    envs.environments.reserve(total);
    envs.labels.reserve(total);
    std::vector<int> targets(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) targets[static_cast<std::size_t>(i)] = i;

    for (std::uint64_t idx = 0; idx < total; ++idx) {
        Eigen::VectorXd a(d);
        std::uint64_t rem = idx;
        for (int axis_i = d - 1; axis_i >= 0; --axis_i) {  // first axis slowest
            a(axis_i) = axis[static_cast<std::size_t>(rem % static_cast<std::uint64_t>(k))];
            rem /= static_cast<std::uint64_t>(k);
        }
        envs.environments.push_back(Intervention{targets, a});
        envs.labels.push_back(label_for(a, static_cast<int>(idx)));
    }
    return envs;
}

EnvironmentSet make_env_random_box(int d, double a_max, int count, std::uint64_t seed) {
    if (d < 1) throw ValidationError("env random box: d must be >= 1");
    if (count < 1) throw ValidationError("env random box: count must be >= 1");
    if (!(a_max > 0.0)) throw ValidationError("env random box: a_max must be > 0");

    EnvironmentSet envs;
    envs.environments.reserve(static_cast<std::size_t>(count));
    envs.labels.reserve(static_cast<std::size_t>(count));
    std::vector<int> targets(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) targets[static_cast<std::size_t>(i)] = i;

    for (int idx = 0; idx < count; ++idx) {
        CounterRng rng = CounterRng::keyed(seed, static_cast<std::uint64_t>(idx), 0);
        Eigen::VectorXd a(d);
        for (int i = 0; i < d; ++i) a(i) = a_max * rng.next_symmetric();
        envs.environments.push_back(Intervention{targets, a});
        envs.labels.push_back(label_for(a, idx));
    }
    return envs;
}

}  // namespace icrl
