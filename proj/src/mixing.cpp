#include "icrl/mixing.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <string>

namespace icrl {

namespace {

constexpr double kOrthTol = 1e-9;
constexpr double kRankRatio = 1e-8;
constexpr double kImageRelTol = 1e-6;
constexpr double kAlignTol = 1e-12;

void require_length(Eigen::Index got, int want, const char* what) {
    if (got != want) {
        throw DimensionMismatch(std::string(what) + ": expected length " +
                                std::to_string(want) + ", got " + std::to_string(got));
    }
}

Eigen::VectorXd apply_layer(const FlowLayer& layer, const Eigen::VectorXd& v) {
    return std::visit(
        [&](const auto& l) -> Eigen::VectorXd {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, OrthogonalLayer>) {
                return l.q * v;
            } else if constexpr (std::is_same_v<T, SignedPowerLayer>) {
                Eigen::VectorXd out(v.size());
                for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = signed_power(v(i), l.gamma(i));
                return out;
            } else {
                return v + l.offset;
            }
        },
        layer);
}

Eigen::VectorXd invert_layer(const FlowLayer& layer, const Eigen::VectorXd& v) {
    return std::visit(
        [&](const auto& l) -> Eigen::VectorXd {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, OrthogonalLayer>) {
                return l.q.transpose() * v;
            } else if constexpr (std::is_same_v<T, SignedPowerLayer>) {
                Eigen::VectorXd out(v.size());
                for (Eigen::Index i = 0; i < v.size(); ++i) {
                    out(i) = signed_power(v(i), 1.0 / l.gamma(i));
                }
                return out;
            } else {
                return v - l.offset;
            }
        },
        layer);
}

FlowLayer inverse_of(const FlowLayer& layer) {
    return std::visit(
        [](const auto& l) -> FlowLayer {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, OrthogonalLayer>) {
                return OrthogonalLayer{l.q.transpose()};
            } else if constexpr (std::is_same_v<T, SignedPowerLayer>) {
                return SignedPowerLayer{l.gamma.cwiseInverse()};
            } else {
                return ShiftLayer{-l.offset};
            }
        },
        layer);
}

void check_layer(const FlowLayer& layer, int d, const std::string& who) {
    std::visit(
        [&](const auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, OrthogonalLayer>) {
                if (l.q.rows() != d || l.q.cols() != d) {
                    throw DimensionMismatch(who + ": orthogonal layer must be " +
                                            std::to_string(d) + "x" + std::to_string(d));
                }
                const double err =
                    (l.q.transpose() * l.q - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
                if (err > kOrthTol) {
                    throw ValidationError(who + ": layer not orthogonal, |QᵀQ - I| = " +
                                          std::to_string(err));
                }
            } else if constexpr (std::is_same_v<T, SignedPowerLayer>) {
                require_length(l.gamma.size(), d, "signed_power gamma");
                if ((l.gamma.array() <= 0.0).any()) {
                    throw ValidationError(who + ": signed power exponents must be > 0");
                }
            } else {
                require_length(l.offset.size(), d, "shift offset");
            }
        },
        layer);
}

Eigen::VectorXd embed_inverse(const LinearMixer& m, const Eigen::VectorXd& x) {
    require_length(x.size(), m.out_dim(), "unmix input");
    Eigen::VectorXd v = m.left_inverse * x;
    // One step of iterative refinement tightens on-image reconstructions to
    // the representational floor.
    v += m.left_inverse * (x - m.matrix * v);
    const double residual = (m.matrix * v - x).norm();
    if (residual > kImageRelTol * std::max(x.norm(), 1e-300)) {
        throw NotInImage("point is off the mixer image (reconstruction residual " +
                         std::to_string(residual) + ")");
    }
    return v;
}

}  // namespace

double signed_power(double t, double gamma) {
    if (gamma == 1.0) return t;
    const double mag = std::pow(std::abs(t), gamma);
    return t < 0.0 ? -mag : mag;
}

LinearMixer LinearMixer::from_matrix(const Eigen::MatrixXd& g) {
    if (g.rows() < g.cols()) {
        throw DimensionMismatch("linear mixer: needs p >= d, got " + std::to_string(g.rows()) +
                                "x" + std::to_string(g.cols()));
    }
    if (g.cols() < 1) throw DimensionMismatch("linear mixer: empty matrix");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (s(s.size() - 1) <= kRankRatio * s(0)) {
        throw ValidationError("linear mixer: matrix is rank deficient (singular value ratio " +
                              std::to_string(s(s.size() - 1) / s(0)) + ")");
    }
    LinearMixer m;
    m.matrix = g;
    m.left_inverse =
        svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
    return m;
}

LinearMixer LinearMixer::identity(int d) {
    LinearMixer m;
    m.matrix = Eigen::MatrixXd::Identity(d, d);
    m.left_inverse = Eigen::MatrixXd::Identity(d, d);
    return m;
}

void validate_mixer(const LinearMixer& m) {
    if (m.matrix.rows() < m.matrix.cols()) {
        throw DimensionMismatch("linear mixer: needs p >= d");
    }
    const Eigen::Index d = m.matrix.cols();
    if (m.left_inverse.rows() != d || m.left_inverse.cols() != m.matrix.rows()) {
        throw DimensionMismatch("linear mixer: left inverse has wrong shape");
    }
    const double err =
        (m.left_inverse * m.matrix - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
    if (err > kOrthTol) {
        throw ValidationError("linear mixer: |G⁺G - I| = " + std::to_string(err));
    }
}

void validate_mixer(const FlowMixer& m) {
    if (m.dim < 1) throw DimensionMismatch("flow mixer: d must be >= 1");
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        check_layer(m.layers[i], m.dim, "flow layer " + std::to_string(i));
    }
    if (m.embedding) {
        validate_mixer(*m.embedding);
        if (m.embedding->in_dim() != m.dim) {
            throw DimensionMismatch("flow mixer: embedding expects dim " +
                                    std::to_string(m.embedding->in_dim()) + ", flow has " +
                                    std::to_string(m.dim));
        }
    }
}

int latent_dim(const Mixer& m) {
    return std::visit([](const auto& v) { return v.in_dim(); }, m);
}

int ambient_dim(const Mixer& m) {
    return std::visit([](const auto& v) { return v.out_dim(); }, m);
}

void validate_mixer(const Mixer& m) {
    std::visit([](const auto& v) { validate_mixer(v); }, m);
}

Eigen::VectorXd mix(const Mixer& m, const Eigen::VectorXd& z) {
    require_length(z.size(), latent_dim(m), "mix input");
    if (const auto* lin = std::get_if<LinearMixer>(&m)) {
        return lin->matrix * z;
    }
    const auto& flow = std::get<FlowMixer>(m);
    Eigen::VectorXd v = z;
    for (const FlowLayer& layer : flow.layers) v = apply_layer(layer, v);
    if (flow.embedding) v = flow.embedding->matrix * v;
    return v;
}

Eigen::MatrixXd mix(const Mixer& m, const Eigen::MatrixXd& z_rows) {
    Eigen::MatrixXd out(z_rows.rows(), ambient_dim(m));
    for (Eigen::Index r = 0; r < z_rows.rows(); ++r) {
        out.row(r) = mix(m, Eigen::VectorXd(z_rows.row(r))).transpose();
    }
    return out;
}

Eigen::VectorXd unmix(const Mixer& m, const Eigen::VectorXd& x) {
    if (const auto* lin = std::get_if<LinearMixer>(&m)) {
        return embed_inverse(*lin, x);
    }
    const auto& flow = std::get<FlowMixer>(m);
    Eigen::VectorXd v = flow.embedding ? embed_inverse(*flow.embedding, x) : x;
    require_length(v.size(), flow.dim, "unmix input");
    for (auto it = flow.layers.rbegin(); it != flow.layers.rend(); ++it) {
        v = invert_layer(*it, v);
    }
    return v;
}

Eigen::MatrixXd unmix(const Mixer& m, const Eigen::MatrixXd& x_rows) {
    Eigen::MatrixXd out(x_rows.rows(), latent_dim(m));
    for (Eigen::Index r = 0; r < x_rows.rows(); ++r) {
        out.row(r) = unmix(m, Eigen::VectorXd(x_rows.row(r))).transpose();
    }
    return out;
}

Eigen::VectorXd ReparamMap::apply(const Eigen::VectorXd& z) const {
    return mix(Mixer{flow}, z);
}

Eigen::MatrixXd ReparamMap::apply(const Eigen::MatrixXd& z_rows) const {
    return mix(Mixer{flow}, z_rows);
}

Eigen::VectorXd ReparamMap::apply_inverse(const Eigen::VectorXd& w) const {
    return unmix(Mixer{flow}, w);
}

ReparamMap ReparamMap::inverse() const {
    ReparamMap out;
    out.flow.dim = flow.dim;
    out.flow.layers.reserve(flow.layers.size());
    for (auto it = flow.layers.rbegin(); it != flow.layers.rend(); ++it) {
        out.flow.layers.push_back(inverse_of(*it));
    }
    return out;
}

Mixer compose(const Mixer& g, const ReparamMap& psi) {
    if (psi.dim() != latent_dim(g)) {
        throw DimensionMismatch("compose: psi dim " + std::to_string(psi.dim()) +
                                " != mixer latent dim " + std::to_string(latent_dim(g)));
    }
    FlowMixer out;
    out.dim = psi.dim();
    out.layers = psi.flow.layers;
    if (const auto* lin = std::get_if<LinearMixer>(&g)) {
        out.embedding = *lin;
    } else {
        const auto& flow = std::get<FlowMixer>(g);
        out.layers.insert(out.layers.end(), flow.layers.begin(), flow.layers.end());
        out.embedding = flow.embedding;
    }
    return Mixer{out};
}

Eigen::MatrixXd householder_to_e1(const Eigen::VectorXd& theta) {
    const double norm = theta.norm();
    if (norm == 0.0 || theta.size() == 0) {
        throw ZeroVector("householder_to_e1: theta must be nonzero");
    }
    const Eigen::Index d = theta.size();
    const Eigen::VectorXd u = theta / norm;

    Eigen::VectorXd aligned = u;
    aligned(0) -= 1.0;
    if (aligned.cwiseAbs().maxCoeff() <= kAlignTol) {
        return Eigen::MatrixXd::Identity(d, d);
    }

    // Reflect u onto -s e1 (s chosen to avoid cancellation), then flip the
    // first coordinate when needed so the result is always +e1.
    const double s = u(0) >= 0.0 ? 1.0 : -1.0;
    Eigen::VectorXd v = u;
    v(0) += s;
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d) - (2.0 / v.squaredNorm()) * v * v.transpose();
    if (s > 0.0) a.row(0) = -a.row(0);
    return a;
}

ReparamMap power_tail(int d, double exponent) {
    if (d < 2) {
        throw DimensionTooSmall("power_tail: requires d >= 2, got " + std::to_string(d));
    }
    if (!(exponent > 0.0)) {
        throw ValidationError("power_tail: exponent must be > 0");
    }
    Eigen::VectorXd gamma = Eigen::VectorXd::Constant(d, exponent);
    gamma(0) = 1.0;
    ReparamMap psi;
    psi.flow.dim = d;
    psi.flow.layers = {SignedPowerLayer{gamma}};
    return psi;
}

ReparamMap cube_tail(int d) { return power_tail(d, 3.0); }

}  // namespace icrl
