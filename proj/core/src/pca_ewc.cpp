#include "rcamon/pca_ewc.hpp"

#include <algorithm>
#include <cmath>

#include "rcamon/error.hpp"
#include "rcamon/linalg.hpp"

namespace rcamon {

using Eigen::Index;
using Eigen::MatrixXd;

MatrixXd compute_omega(const MatrixXd& prev_cov, double zeta, OmegaStrategy strategy) {
    if (prev_cov.rows() != prev_cov.cols()) throw Error(ErrorCode::DimensionMismatch, "covariance must be square");
    if (!(zeta >= 0.0)) throw Error(ErrorCode::InvalidArgument, "zeta must be nonnegative");
    const Index m = prev_cov.rows();
    if (strategy == OmegaStrategy::Identity) return zeta * MatrixXd::Identity(m, m);

    const MatrixXd cov = linalg::symmetrize(prev_cov);
    const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    const double hi = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    if (eig.eigenvalues().minCoeff() < -1e-10 * std::max(hi, 1.0)) {
        throw Error(ErrorCode::NonPSDInput, "previous-mode covariance is not positive semidefinite");
    }
    const double eps = 1e-8 * cov.trace() / static_cast<double>(m);
    MatrixXd omega = cov;
    omega.diagonal().array() += std::max(eps, 0.0);
    return zeta * omega;
}

double ewc_objective(const MatrixXd& p, const MatrixXd& gram, const EwcPenalty& penalty) {
    const MatrixXd op = penalty.omega * p;
    return (p.transpose() * op).trace() - (p.transpose() * gram * p).trace() -
           2.0 * (p.transpose() * penalty.omega * penalty.p_prev).trace();
}

MatrixXd polar_factor(const MatrixXd& y) {
    const Eigen::JacobiSVD<MatrixXd> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return svd.matrixU() * svd.matrixV().transpose();
}

EwcResult fit_pca_ewc(const MatrixXd& x, const EwcPenalty& penalty, const EwcOptions& options) {
    const Index m = penalty.p_prev.rows();
    const Index l = penalty.p_prev.cols();
    if (x.cols() != m || penalty.omega.rows() != m || penalty.omega.cols() != m) {
        throw Error(ErrorCode::DimensionMismatch, "EWC inputs have inconsistent dimensions");
    }
    if (l < 1 || l > m) throw Error(ErrorCode::InvalidArgument, "retained dimension out of range");

    const MatrixXd gram = x.transpose() * x;
    const MatrixXd omega = linalg::symmetrize(penalty.omega);
    // Shift making omega_max I - Omega PSD; G + omega_max I - Omega is then
    // PSD and its linearisation majorises the objective from above.
    const Eigen::SelfAdjointEigenSolver<MatrixXd> omega_eig(omega, Eigen::EigenvaluesOnly);
    const double omega_max = std::max(omega_eig.eigenvalues().maxCoeff(), 0.0);
    MatrixXd curvature = gram - omega;
    curvature.diagonal().array() += omega_max;
    const MatrixXd anchor = omega * penalty.p_prev;

    EwcResult res;
    res.p = penalty.p_prev;
    if (options.record_objective) res.objective.push_back(ewc_objective(res.p, gram, penalty));
    // Without data the objective is ||Omega^1/2 (P - P_prev)||^2 up to a constant.
    if (gram.squaredNorm() == 0.0) {
        res.converged = true;
        return res;
    }
    for (std::size_t it = 0; it < options.max_iter; ++it) {
        const MatrixXd y = anchor + curvature * res.p;
        if (y.squaredNorm() == 0.0) {
            res.converged = true;
            break;
        }
        const MatrixXd next = polar_factor(y);
        const double change = (next - res.p).squaredNorm();
        res.p = next;
        res.iterations = it + 1;
        if (options.record_objective) res.objective.push_back(ewc_objective(res.p, gram, penalty));
        if (change < options.eps) {
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace rcamon
