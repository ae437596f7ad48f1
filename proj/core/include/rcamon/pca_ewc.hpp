#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace rcamon {

/// Quadratic penalty anchoring a new projection to the previous mode's one.
struct EwcPenalty {
    Eigen::MatrixXd omega;   // m x m, symmetric PSD importance matrix
    Eigen::MatrixXd p_prev;  // m x l, orthonormal columns
    double zeta = 0.0;
};

enum class OmegaStrategy { Covariance, Identity };

/// zeta * (cov + eps I) with eps = 1e-8 trace(cov) / m, or zeta * I for the
/// identity strategy. Throws NonPSDInput for a covariance with a clearly
/// negative eigenvalue.
Eigen::MatrixXd compute_omega(const Eigen::MatrixXd& prev_cov, double zeta,
                              OmegaStrategy strategy = OmegaStrategy::Covariance);

struct EwcOptions {
    double eps = 1e-8;  // stop when ||P_{i+1} - P_i||_F^2 < eps
    std::size_t max_iter = 500;
    bool record_objective = false;
};

struct EwcResult {
    Eigen::MatrixXd p;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> objective;  // J at P_0, P_1, ... when recorded
};

/// tr(P^T Omega P) - tr(P^T G P) - 2 tr(P^T Omega P_prev), G = X^T X.
double ewc_objective(const Eigen::MatrixXd& p, const Eigen::MatrixXd& gram, const EwcPenalty& penalty);

/// Minimises the regularised PCA loss over orthonormal m x l matrices,
/// starting from P_prev. Each step majorises the concave part at the current
/// iterate and projects onto the Stiefel manifold through an SVD, so the
/// objective never increases. `l` must equal the column count of P_prev.
EwcResult fit_pca_ewc(const Eigen::MatrixXd& x, const EwcPenalty& penalty, const EwcOptions& options = {});

/// Polar factor U V^T of the thin SVD of y.
Eigen::MatrixXd polar_factor(const Eigen::MatrixXd& y);

}  // namespace rcamon
