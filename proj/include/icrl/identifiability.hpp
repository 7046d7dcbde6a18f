#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "icrl/common.hpp"

namespace icrl {

// Decision certificate for Ẑ = D P Z: permutation, per-coordinate scales,
// and the statistics the verdict is based on.
struct DisentanglementReport {
    bool verdict = false;
    std::vector<int> permutation;        // pi[i] = matched true coordinate
    Eigen::VectorXd scales;              // diagonal of D
    Eigen::VectorXd matched_abs_corr;
    Eigen::VectorXd ratio_dispersion;    // MAD(ratio) / |scale|
    double mcc = 0.0;
};

struct LinearityReport {
    double r_squared = 0.0;
    double max_abs_residual = 0.0;
    Eigen::VectorXd coefficients;
    double intercept = 0.0;
    bool linear = false;
};

struct LinearFitReport {
    Eigen::MatrixXd matrix;     // L in z_hat ≈ L z + b
    Eigen::VectorXd intercept;
    double relative_residual = 0.0;
    double condition = 0.0;
    bool identified = false;
};

// |Pearson correlation| between columns of z_hat and z. Throws
// DegenerateColumn when any column has (near) zero sample variance.
Eigen::MatrixXd abs_correlation_matrix(const Eigen::MatrixXd& z_hat,
                                       const Eigen::MatrixXd& z);

// Assignment maximizing the total score; ties resolved to the
// lexicographically smallest permutation.
std::vector<int> assignment_exhaustive(const Eigen::MatrixXd& score);

// Jonker-Volgenant shortest augmenting path; O(d³), for larger d.
std::vector<int> assignment_optimize(const Eigen::MatrixXd& score);

// Exhaustive for d <= 6, optimization-based beyond.
std::vector<int> best_assignment(const Eigen::MatrixXd& score);

// Operational Definition-1 test: matched |corr| >= 1 - tol_corr and a
// constant componentwise ratio (median/MAD dispersion <= tol_ratio).
DisentanglementReport check_disentangled(const Eigen::MatrixXd& z_hat,
                                         const Eigen::MatrixXd& z,
                                         double tol_corr = 1e-4,
                                         double tol_ratio = 1e-3);

// Mean matched |correlation| under the optimal assignment, in [0, 1].
double mcc(const Eigen::MatrixXd& z_hat, const Eigen::MatrixXd& z);

// Least-squares affine fit of fn over points sampled in `box`; linear
// verdict iff max |residual| <= tol * max(1, output scale).
LinearityReport linearity_test(const ScalarFn& fn, const Box& box, int n_points,
                               std::uint64_t seed, double tol = 1e-9);

// z_hat ≈ L z + b; identified iff the relative residual is <= 1e-6 and L is
// invertible with condition number <= 1e8.
LinearFitReport linear_identifiability(const Eigen::MatrixXd& z_hat,
                                       const Eigen::MatrixXd& z);

}  // namespace icrl
