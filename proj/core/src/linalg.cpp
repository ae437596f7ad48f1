#include "rcamon/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "rcamon/error.hpp"

namespace rcamon {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFiniteData: return "NonFiniteData";
        case ErrorCode::ConstantColumn: return "ConstantColumn";
        case ErrorCode::MalformedInput: return "MalformedInput";
        case ErrorCode::SeriesTooShort: return "SeriesTooShort";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::IndefiniteB: return "IndefiniteB";
        case ErrorCode::NoCointegration: return "NoCointegration";
        case ErrorCode::NumericalBreakdown: return "NumericalBreakdown";
        case ErrorCode::IndefiniteBlock: return "IndefiniteBlock";
        case ErrorCode::AllZeroSpectrum: return "AllZeroSpectrum";
        case ErrorCode::NonPSDInput: return "NonPSDInput";
        case ErrorCode::Untrained: return "Untrained";
        case ErrorCode::TooFewValues: return "TooFewValues";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    }
    return "Unknown";
}

}  // namespace rcamon

namespace rcamon::linalg {

SymmetricEigen eig_descending(const MatrixXd& symmetric) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(symmetrize(symmetric));
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorCode::NumericalBreakdown, "symmetric eigensolver did not converge");
    }
    const Eigen::Index n = symmetric.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    // Eigen returns ascending values; reverse, then stable-sort to keep ties in
    // first-occurrence order of the reversed sequence.
    std::reverse(order.begin(), order.end());
    const VectorXd& ev = solver.eigenvalues();
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return ev(a) > ev(b); });

    SymmetricEigen out{VectorXd(n), MatrixXd(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values(i) = ev(order[static_cast<std::size_t>(i)]);
        out.vectors.col(i) = solver.eigenvectors().col(order[static_cast<std::size_t>(i)]);
    }
    return out;
}

MatrixXd inv_sqrt_symmetric(const MatrixXd& spd) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(symmetrize(spd));
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorCode::NumericalBreakdown, "symmetric eigensolver did not converge");
    }
    const VectorXd& ev = solver.eigenvalues();
    if (ev.size() > 0 && !(ev.minCoeff() > 0.0)) {
        throw Error(ErrorCode::IndefiniteBlock, "matrix is not positive definite");
    }
    const MatrixXd& q = solver.eigenvectors();
    return q * ev.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();
}

double whitening_defect(const MatrixXd& k, const MatrixXd& b) {
    const MatrixXd kbk = k * b * k.transpose();
    return (kbk - MatrixXd::Identity(kbk.rows(), kbk.cols())).norm();
}

double orthonormality_defect(const MatrixXd& p) {
    return (p.transpose() * p - MatrixXd::Identity(p.cols(), p.cols())).norm();
}

MatrixXd orthonormalize(const MatrixXd& a) {
    Eigen::HouseholderQR<MatrixXd> qr(a);
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(a.rows(), a.cols());
    const MatrixXd& r = qr.matrixQR();
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        if (r(j, j) < 0.0) q.col(j) *= -1.0;
    }
    return q;
}

double max_principal_angle_deg(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd qa = orthonormalize(a);
    MatrixXd qb = orthonormalize(b);
    if (qa.cols() > qb.cols()) std::swap(qa, qb);
    // sin of the largest angle = spectral norm of the part of the smaller basis
    // lying outside the larger span.
    const MatrixXd residual = qa - qb * (qb.transpose() * qa);
    Eigen::JacobiSVD<MatrixXd> svd(residual);
    const double s = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
    return std::asin(std::clamp(s, 0.0, 1.0)) * 180.0 / std::numbers::pi;
}

void fix_column_signs(MatrixXd& m, Eigen::Index ref_row_begin, Eigen::Index ref_row_count) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        Eigen::Index arg = 0;
        m.col(j).segment(ref_row_begin, ref_row_count).cwiseAbs().maxCoeff(&arg);
        if (m(ref_row_begin + arg, j) < 0.0) m.col(j) *= -1.0;
    }
}

}  // namespace rcamon::linalg
