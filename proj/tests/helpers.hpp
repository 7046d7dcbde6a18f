#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <vector>

#include "icrl/mixing.hpp"
#include "icrl/rng.hpp"
#include "icrl/scm.hpp"

namespace icrl::testing {

// Z2 := eps2; Z1 := Z2 + eps1; Y := Z1 + 2 Z2 + epsY.
inline Scm make_chain2(double var1 = 1.0, double var2 = 1.0, double var_y = 0.25) {
    Scm scm;
    scm.d = 2;
    scm.latent_mechanisms.push_back(Mechanism::linear(
        {1}, Eigen::VectorXd::Constant(1, 1.0), NoiseSpec{NoiseFamily::gaussian, var1}));
    scm.latent_mechanisms.push_back(
        Mechanism::linear({}, Eigen::VectorXd(0), NoiseSpec{NoiseFamily::gaussian, var2}));
    Eigen::VectorXd theta(2);
    theta << 1.0, 2.0;
    scm.target_mechanism =
        Mechanism::linear({0, 1}, theta, NoiseSpec{NoiseFamily::gaussian, var_y});
    return scm;
}

inline Eigen::VectorXd random_normal_vector(int d, CounterRng& rng) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v(i) = rng.next_normal();
    return v;
}

// Deterministic random orthogonal matrix: QR of a gaussian matrix with the
// R-diagonal sign convention fixed.
inline Eigen::MatrixXd random_orthogonal(int d, CounterRng& rng) {
    Eigen::MatrixXd g(d, d);
    for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) g(r, c) = rng.next_normal();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r_mat = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < d; ++i) {
        if (r_mat(i, i) < 0) q.col(i) = -q.col(i);
    }
    return q;
}

// Well-conditioned random embedding matrix (p x d).
inline Eigen::MatrixXd random_embedding(int p, int d, CounterRng& rng) {
    while (true) {
        Eigen::MatrixXd g(p, d);
        for (int r = 0; r < p; ++r) {
            for (int c = 0; c < d; ++c) g(r, c) = rng.next_normal();
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(g);
        if (svd.singularValues()(d - 1) > 0.1 * svd.singularValues()(0)) return g;
    }
}

// Random mixer inside the family's numerically exact envelope: expanding
// power layers (gamma > 1) have contracting inverses near 0 that blow up any
// absolute rounding error injected *after* them, so they are only placed
// last and never under an embedding; inner power layers keep gamma <= 1,
// whose inverses are Lipschitz at 0.
inline Mixer random_flow_mixer(int d, std::uint64_t seed, int n_layers, int p = 0) {
    CounterRng rng = CounterRng::keyed(seed, 0xF10E, 0);
    FlowMixer flow;
    flow.dim = d;
    for (int i = 0; i < n_layers; ++i) {
        switch (rng.next_u64() % 3) {
            case 0: flow.layers.push_back(OrthogonalLayer{random_orthogonal(d, rng)}); break;
            case 1: {
                Eigen::VectorXd gamma(d);
                for (int j = 0; j < d; ++j) gamma(j) = 0.6 + 0.4 * rng.next_unit();
                flow.layers.push_back(SignedPowerLayer{gamma});
                break;
            }
            default:
                flow.layers.push_back(ShiftLayer{random_normal_vector(d, rng)});
        }
    }
    if (p > d) {
        flow.embedding = LinearMixer::from_matrix(random_embedding(p, d, rng));
    } else if (rng.next_u64() % 2 == 0) {
        Eigen::VectorXd gamma(d);
        for (int j = 0; j < d; ++j) gamma(j) = 1.0 + 2.0 * rng.next_unit();
        flow.layers.push_back(SignedPowerLayer{gamma});
    }
    return Mixer{flow};
}

inline ReparamMap random_reparam(int d, std::uint64_t seed, int n_layers) {
    ReparamMap psi;
    psi.flow = std::get<FlowMixer>(random_flow_mixer(d, seed, n_layers, 0));
    return psi;
}

inline bool bits_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

inline bool bits_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == b.size() && (a.array() == b.array()).all();
}

// ---- independent oracles ----

// Least-squares affine fit via normal equations (independent of the QR path
// used by the library).
struct AffineFitOracle {
    Eigen::VectorXd slope;
    double intercept = 0.0;
    double max_abs_residual = 0.0;
};

inline AffineFitOracle oracle_affine_fit(const Eigen::MatrixXd& z, const Eigen::VectorXd& y) {
    const Eigen::Index n = z.rows();
    const Eigen::Index d = z.cols();
    Eigen::MatrixXd design(n, d + 1);
    design.col(0).setOnes();
    design.rightCols(d) = z;
    const Eigen::MatrixXd gram = design.transpose() * design;
    const Eigen::VectorXd beta = gram.ldlt().solve(design.transpose() * y);
    AffineFitOracle out;
    out.intercept = beta(0);
    out.slope = beta.tail(d);
    out.max_abs_residual = (y - design * beta).cwiseAbs().maxCoeff();
    return out;
}

inline double oracle_pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::VectorXd ca = a.array() - a.mean();
    const Eigen::VectorXd cb = b.array() - b.mean();
    return ca.dot(cb) / (ca.norm() * cb.norm());
}

// Minimax residual of the best affine fit on a 1-D point set: the optimum
// equioscillates on some x-ordered triple, so the max over all such triples
// of half the chord deviation is the exact grid minimax value.
inline double oracle_minimax_affine_residual(Eigen::VectorXd x, Eigen::VectorXd y) {
    const Eigen::Index n = x.size();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::sort(idx.begin(), idx.end(),
              [&](Eigen::Index a, Eigen::Index b) { return x(a) < x(b); });
    const Eigen::VectorXd xs = x(idx);
    const Eigen::VectorXd ys = y(idx);

    double best = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            for (Eigen::Index k = j + 1; k < n; ++k) {
                const double xi = xs(i), xj = xs(j), xk = xs(k);
                if (xi == xj || xj == xk) continue;
                const double slope = (ys(k) - ys(i)) / (xk - xi);
                const double chord_dev = ys(j) - (ys(i) + slope * (xj - xi));
                best = std::max(best, 0.5 * std::abs(chord_dev));
            }
        }
    }
    return best;
}

// Simpson-rule moment E[t^k] of t ~ U[-a, a].
inline double oracle_uniform_moment(double a, int k, int intervals = 4000) {
    const double h = 2.0 * a / intervals;
    double sum = 0.0;
    for (int i = 0; i <= intervals; ++i) {
        const double t = -a + h * i;
        const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        sum += w * std::pow(t, k);
    }
    return sum * h / 3.0 / (2.0 * a);
}

// Standard error of the empirical risk (1/n) sum (D + eps)^2 for gaussian
// eps with variance sigma2 and constant gap D.
inline double oracle_risk_stderr(double gap, double sigma2, long n) {
    const double var = 4.0 * gap * gap * sigma2 + 2.0 * sigma2 * sigma2;
    return std::sqrt(var / static_cast<double>(n));
}

}  // namespace icrl::testing
