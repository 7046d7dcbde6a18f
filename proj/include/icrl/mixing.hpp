#pragma once

#include <Eigen/Dense>
#include <optional>
#include <variant>
#include <vector>

#include "icrl/common.hpp"

namespace icrl {

// Injective linear map R^d -> R^p (p >= d) with a stored left inverse.
struct LinearMixer {
    Eigen::MatrixXd matrix;        // p x d, full column rank
    Eigen::MatrixXd left_inverse;  // d x p, left_inverse * matrix = I_d

    int in_dim() const { return static_cast<int>(matrix.cols()); }
    int out_dim() const { return static_cast<int>(matrix.rows()); }

    // Builds the pseudo left inverse via SVD; rejects p < d and singular
    // value ratios below 1e-8.
    static LinearMixer from_matrix(const Eigen::MatrixXd& g);
    static LinearMixer identity(int d);
};

struct OrthogonalLayer {
    Eigen::MatrixXd q;  // d x d, QᵀQ = I within 1e-9
};

// t -> sign(t)|t|^gamma per coordinate; strictly monotone for gamma > 0 with
// inverse exponent 1/gamma. Non-Lipschitz at 0 when gamma < 1.
struct SignedPowerLayer {
    Eigen::VectorXd gamma;
};

struct ShiftLayer {
    Eigen::VectorXd offset;
};

using FlowLayer = std::variant<OrthogonalLayer, SignedPowerLayer, ShiftLayer>;

// Composition of closed-form-invertible layers, optionally followed by a
// linear embedding into R^p. Without the embedding it is a bijection of R^d.
struct FlowMixer {
    int dim = 0;
    std::vector<FlowLayer> layers;
    std::optional<LinearMixer> embedding;

    int in_dim() const { return dim; }
    int out_dim() const { return embedding ? embedding->out_dim() : dim; }

    static FlowMixer identity(int d) { return FlowMixer{d, {}, std::nullopt}; }
};

// Checks layer shapes, orthogonality and positivity invariants.
void validate_mixer(const LinearMixer& m);
void validate_mixer(const FlowMixer& m);

using Mixer = std::variant<LinearMixer, FlowMixer>;

int latent_dim(const Mixer& m);
int ambient_dim(const Mixer& m);
void validate_mixer(const Mixer& m);

double signed_power(double t, double gamma);

Eigen::VectorXd mix(const Mixer& m, const Eigen::VectorXd& z);
Eigen::MatrixXd mix(const Mixer& m, const Eigen::MatrixXd& z_rows);

// Exact inverse on the image. For embedded mixers, membership is decided by
// the reconstruction residual ||G G⁺ x - x|| <= 1e-6 ||x||; NotInImage
// signals evaluation off Im(g), where composed predictors are unconstrained.
Eigen::VectorXd unmix(const Mixer& m, const Eigen::VectorXd& x);
Eigen::MatrixXd unmix(const Mixer& m, const Eigen::MatrixXd& x_rows);

// Invertible reparametrization of latent space: a square FlowMixer.
struct ReparamMap {
    FlowMixer flow;  // no embedding

    int dim() const { return flow.dim; }
    Eigen::VectorXd apply(const Eigen::VectorXd& z) const;
    Eigen::MatrixXd apply(const Eigen::MatrixXd& z_rows) const;
    Eigen::VectorXd apply_inverse(const Eigen::VectorXd& w) const;

    // Closed-form inverse: layers reversed and individually inverted.
    ReparamMap inverse() const;

    static ReparamMap identity(int d) { return ReparamMap{FlowMixer::identity(d)}; }
};

// g ∘ psi: psi's layers run first, then g (its embedding stays last); the
// returned mixer's unmix evaluates psi⁻¹(g⁻¹(x)).
Mixer compose(const Mixer& g, const ReparamMap& psi);

// Orthogonal A with A theta = (||theta||, 0, ..., 0)ᵀ, built from a single
// Householder reflection plus a deterministic sign fix. Returns I when theta
// is already aligned with e1 within 1e-12.
Eigen::MatrixXd householder_to_e1(const Eigen::VectorXd& theta);

// Psi_0: first coordinate identity, coordinates 2..d cubed. Requires d >= 2.
ReparamMap cube_tail(int d);

// Like cube_tail but with an arbitrary positive tail exponent.
ReparamMap power_tail(int d, double exponent);

}  // namespace icrl
