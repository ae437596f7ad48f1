#include "rcamon/rpca_stream.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rcamon/error.hpp"
#include "rcamon/linalg.hpp"

namespace rcamon {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

std::size_t cpv_select(const VectorXd& lambda, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw Error(ErrorCode::InvalidArgument, "CPV threshold must lie in (0, 1]");
    const VectorXd pos = lambda.cwiseMax(0.0);
    const double total = pos.sum();
    if (!(total > 0.0)) throw Error(ErrorCode::AllZeroSpectrum, "all eigenvalues are zero");
    double cum = 0.0;
    for (Index i = 0; i < pos.size(); ++i) {
        cum += pos(i);
        if (cum / total >= threshold - 1e-12) return static_cast<std::size_t>(i + 1);
    }
    return static_cast<std::size_t>(pos.size());
}

namespace {

void sort_descending(RpcaState& s) {
    std::vector<Index> order(static_cast<std::size_t>(s.lambda.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return s.lambda(a) > s.lambda(b); });
    bool sorted = true;
    for (std::size_t i = 0; i < order.size(); ++i) sorted = sorted && order[i] == static_cast<Index>(i);
    if (sorted) return;
    MatrixXd p(s.p.rows(), s.p.cols());
    VectorXd lam(s.lambda.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        p.col(static_cast<Index>(i)) = s.p.col(order[i]);
        lam(static_cast<Index>(i)) = s.lambda(order[i]);
    }
    s.p = std::move(p);
    s.lambda = std::move(lam);
}

}  // namespace

RpcaState rpca_init(const MatrixXd& x, const RpcaOptions& options) {
    const Index n = x.rows();
    const Index m = x.cols();
    if (m < 1) throw Error(ErrorCode::DimensionMismatch, "PCA input has no columns");
    if (n < m + 1) throw Error(ErrorCode::TooFewSamples, "PCA needs at least m + 1 samples");
    if (!x.allFinite()) throw Error(ErrorCode::NonFiniteData, "PCA input contains non-finite values");

    Scaler sc;
    sc.mean = x.colwise().mean();
    const MatrixXd centered = x.rowwise() - sc.mean;
    sc.std = (centered.colwise().squaredNorm() / static_cast<double>(n - 1)).cwiseSqrt();
    for (Index i = 0; i < m; ++i) {
        if (sc.std(i) < kRpcaMinStd) sc.std(i) = 1.0;
    }
    const MatrixXd z = scale(sc, x);
    const MatrixXd cov = linalg::symmetrize(z.transpose() * z / static_cast<double>(n - 1));
    const linalg::SymmetricEigen eig = linalg::eig_descending(cov);

    RpcaState s;
    s.options = options;
    s.scaler = sc;
    s.p = eig.vectors;
    s.lambda = eig.values.cwiseMax(0.0);
    s.l = cpv_select(s.lambda, options.cpv);
    s.k = static_cast<std::size_t>(n);
    return s;
}

RpcaState rpca_from_eigensystem(const Scaler& scaler, const MatrixXd& p, const VectorXd& lambda, std::size_t l,
                                std::size_t k, const RpcaOptions& options) {
    if (p.rows() != p.cols() || p.cols() != lambda.size() || scaler.size() != p.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "inconsistent eigen-system shapes");
    }
    if (l < 1 || l > static_cast<std::size_t>(p.cols())) throw Error(ErrorCode::InvalidArgument, "l out of range");
    RpcaState s;
    s.options = options;
    s.scaler = scaler;
    s.p = p;
    s.lambda = lambda.cwiseMax(0.0);
    s.l = l;
    s.k = k;
    sort_descending(s);
    return s;
}

RowVectorXd rpca_scale(const RpcaState& s, const RowVectorXd& x) {
    if (x.size() != s.dim()) throw Error(ErrorCode::DimensionMismatch, "PCA sample has the wrong length");
    RowVectorXd z(x.size());
    for (Index i = 0; i < x.size(); ++i) {
        const double sd = s.scaler.std(i) < kRpcaMinStd ? 1.0 : s.scaler.std(i);
        z(i) = (x(i) - s.scaler.mean(i)) / sd;
    }
    return z;
}

std::size_t effective_memory(const RpcaState& s) noexcept {
    return s.options.memory > 0 ? std::min(s.k, s.options.memory) : s.k;
}

void rpca_update(RpcaState& s, const RowVectorXd& z) {
    const Index m = s.dim();
    if (z.size() != m) throw Error(ErrorCode::DimensionMismatch, "PCA sample has the wrong length");
    if (s.k < 1) throw Error(ErrorCode::InvalidArgument, "RPCA state has no samples");
    const double k = static_cast<double>(effective_memory(s));
    const double alpha = k / (k + 1.0);

    const VectorXd kappa = s.p.transpose() * z.transpose();
    const VectorXd shifted = k * s.lambda + kappa.cwiseAbs2();
    MatrixXd qv = MatrixXd::Identity(m, m);
    for (Index j = 0; j < m; ++j) {
        for (Index i = 0; i < m; ++i) {
            if (i == j) continue;
            const double num = kappa(i) * kappa(j);
            if (num == 0.0) continue;
            const double den = shifted(j) - shifted(i);
            if (std::abs(den) < s.options.gap_tol) {
                s.reorth_pending = true;
                continue;
            }
            qv(i, j) += num / den;
        }
    }
    s.p = s.p * qv;
    const VectorXd increment =
        s.options.lambda_mode == FopLambdaMode::Squared ? VectorXd(kappa.cwiseAbs2()) : kappa;
    s.lambda = alpha * s.lambda + (1.0 - alpha) * increment;
    ++s.k;
    ++s.steps_since_reorth;

    if (s.reorth_pending || (s.options.reorth_period > 0 && s.steps_since_reorth >= s.options.reorth_period) ||
        linalg::orthonormality_defect(s.p) > s.options.reorth_tol) {
        s.p = linalg::orthonormalize(s.p);
        s.steps_since_reorth = 0;
        s.reorth_pending = false;
    }
    sort_descending(s);
}

RowVectorXd rpca_observe(RpcaState& s, const RowVectorXd& x) {
    s.scaler = update_scaler(s.scaler, x, effective_memory(s));
    const RowVectorXd z = rpca_scale(s, x);
    rpca_update(s, z);
    return z;
}

MatrixXd rpca_covariance(const RpcaState& s) {
    return linalg::symmetrize(s.p * s.lambda.asDiagonal() * s.p.transpose());
}

}  // namespace rcamon
