#include "icrl/identifiability.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace icrl {

namespace {

constexpr double kVarianceFloor = 1e-20;
constexpr double kRatioSupport = 1e-8;

void check_pair(const Eigen::MatrixXd& z_hat, const Eigen::MatrixXd& z) {
    if (z_hat.rows() != z.rows() || z_hat.cols() != z.cols()) {
        throw DimensionMismatch("latent matrices must have equal shape");
    }
    if (z.rows() < z.cols() + 2) {
        throw ValidationError("need at least d + 2 rows, got " + std::to_string(z.rows()));
    }
}

// Centered columns and their norms; throws on (near) constant columns.
struct Centered {
    Eigen::MatrixXd cols;
    Eigen::VectorXd norms;
};

Centered center_columns(const Eigen::MatrixXd& m, const char* who) {
    Centered out;
    out.cols = m.rowwise() - m.colwise().mean();
    out.norms.resize(m.cols());
    const double n = static_cast<double>(m.rows());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double ss = out.cols.col(c).squaredNorm();
        const double mean = m.col(c).mean();
        if (ss / n <= kVarianceFloor * (1.0 + mean * mean)) {
            throw DegenerateColumn(std::string(who) + " column " + std::to_string(c + 1) +
                                   " has zero sample variance; pool more diverse environments");
        }
        out.norms(c) = std::sqrt(ss);
    }
    return out;
}

}  // namespace

Eigen::MatrixXd abs_correlation_matrix(const Eigen::MatrixXd& z_hat,
                                       const Eigen::MatrixXd& z) {
    check_pair(z_hat, z);
    const Centered a = center_columns(z_hat, "z_hat");
    const Centered b = center_columns(z, "z");
    Eigen::MatrixXd corr(z_hat.cols(), z.cols());
    for (Eigen::Index i = 0; i < z_hat.cols(); ++i) {
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            corr(i, j) = std::abs(a.cols.col(i).dot(b.cols.col(j))) / (a.norms(i) * b.norms(j));
        }
    }
    return corr;
}

std::vector<int> assignment_exhaustive(const Eigen::MatrixXd& score) {
    const int d = static_cast<int>(score.rows());
    std::vector<int> perm(static_cast<std::size_t>(d));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_total = -std::numeric_limits<double>::infinity();
    // next_permutation walks lexicographically, so keeping only strictly
    // better totals leaves the lexicographically smallest optimum.
    do {
        double total = 0.0;
        for (int i = 0; i < d; ++i) total += score(i, perm[static_cast<std::size_t>(i)]);
        if (total > best_total) {
            best_total = total;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

std::vector<int> assignment_optimize(const Eigen::MatrixXd& score) {
    // Hungarian algorithm with potentials on the min-cost form.
    const int n = static_cast<int>(score.rows());
    const double shift = score.maxCoeff();
    auto cost = [&](int i, int j) { return shift - score(i, j); };

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);

    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
        do {
            used[static_cast<std::size_t>(j0)] = true;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> out(static_cast<std::size_t>(n), 0);
    for (int j = 1; j <= n; ++j) {
        out[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    }
    return out;
}

std::vector<int> best_assignment(const Eigen::MatrixXd& score) {
    if (score.rows() != score.cols()) {
        throw DimensionMismatch("assignment: score matrix must be square");
    }
    return score.rows() <= 6 ? assignment_exhaustive(score) : assignment_optimize(score);
}

DisentanglementReport check_disentangled(const Eigen::MatrixXd& z_hat,
                                         const Eigen::MatrixXd& z, double tol_corr,
                                         double tol_ratio) {
    const Eigen::MatrixXd corr = abs_correlation_matrix(z_hat, z);
    const std::vector<int> perm = best_assignment(corr);
    const int d = static_cast<int>(z.cols());

    DisentanglementReport report;
    report.permutation = perm;
    report.scales.resize(d);
    report.matched_abs_corr.resize(d);
    report.ratio_dispersion.resize(d);

    double corr_sum = 0.0;
    bool ok = true;
    for (int i = 0; i < d; ++i) {
        const int j = perm[static_cast<std::size_t>(i)];
        report.matched_abs_corr(i) = corr(i, j);
        corr_sum += corr(i, j);

        std::vector<double> ratios;
        ratios.reserve(static_cast<std::size_t>(z.rows()));
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
            if (std::abs(z(r, j)) > kRatioSupport) {
                ratios.push_back(z_hat(r, i) / z(r, j));
            }
        }
        if (ratios.empty()) {
            throw DegenerateColumn("z column " + std::to_string(j + 1) +
                                   " is numerically zero on every row");
        }
        const double scale = median(ratios);
        report.scales(i) = scale;
        report.ratio_dispersion(i) =
            scale == 0.0 ? std::numeric_limits<double>::infinity()
                         : median_abs_deviation(ratios, scale) / std::abs(scale);

        ok = ok && report.matched_abs_corr(i) >= 1.0 - tol_corr &&
             report.ratio_dispersion(i) <= tol_ratio && std::abs(scale) > 0.0;
    }
    report.mcc = corr_sum / d;
    report.verdict = ok;
    return report;
}

double mcc(const Eigen::MatrixXd& z_hat, const Eigen::MatrixXd& z) {
    const Eigen::MatrixXd corr = abs_correlation_matrix(z_hat, z);
    const std::vector<int> perm = best_assignment(corr);
    double total = 0.0;
    for (int i = 0; i < static_cast<int>(corr.rows()); ++i) {
        total += corr(i, perm[static_cast<std::size_t>(i)]);
    }
    return total / static_cast<double>(corr.rows());
}

LinearityReport linearity_test(const ScalarFn& fn, const Box& box, int n_points,
                               std::uint64_t seed, double tol) {
    const int d = box.dim();
    if (n_points < d + 2) {
        throw ValidationError("linearity_test: needs at least d + 2 points");
    }

    Eigen::MatrixXd design(n_points, d + 1);
    Eigen::VectorXd y(n_points);
    for (int i = 0; i < n_points; ++i) {
        const Eigen::VectorXd z = box.sample(seed, static_cast<std::uint64_t>(i));
        design(i, 0) = 1.0;
        design.row(i).tail(d) = z.transpose();
        y(i) = fn(z);
    }

    const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd residual = y - design * beta;

    LinearityReport report;
    report.intercept = beta(0);
    report.coefficients = beta.tail(d);
    report.max_abs_residual = residual.cwiseAbs().maxCoeff();
    const double ss_tot = (y.array() - y.mean()).square().sum();
    report.r_squared = ss_tot > 0.0 ? 1.0 - residual.squaredNorm() / ss_tot
                                    : (report.max_abs_residual == 0.0 ? 1.0 : 0.0);
    const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
    report.linear = report.max_abs_residual <= tol * scale;
    return report;
}

LinearFitReport linear_identifiability(const Eigen::MatrixXd& z_hat,
                                       const Eigen::MatrixXd& z) {
    check_pair(z_hat, z);
    const long n = z.rows();
    const int d = static_cast<int>(z.cols());

    Eigen::MatrixXd design(n, d + 1);
    design.col(0).setOnes();
    design.rightCols(d) = z;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < d + 1) {
        throw DegenerateColumn("z columns are affinely degenerate (design rank " +
                               std::to_string(qr.rank()) + " < " + std::to_string(d + 1) + ")");
    }
    const Eigen::MatrixXd coeff = qr.solve(z_hat);  // (d+1) x d

    LinearFitReport report;
    report.intercept = coeff.row(0).transpose();
    report.matrix = coeff.bottomRows(d).transpose();  // z_hat ≈ L z + b

    const Eigen::MatrixXd fitted = design * coeff;
    const Eigen::MatrixXd centered = z_hat.rowwise() - z_hat.colwise().mean();
    const double denom = centered.norm();
    report.relative_residual =
        denom > 0.0 ? (z_hat - fitted).norm() / denom : (z_hat - fitted).norm();

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(report.matrix);
    const auto& s = svd.singularValues();
    report.condition = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1)
                                             : std::numeric_limits<double>::infinity();
    report.identified = report.relative_residual <= 1e-6 && report.condition <= 1e8;
    return report;
}

}  // namespace icrl
