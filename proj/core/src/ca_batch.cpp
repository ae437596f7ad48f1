#include "rcamon/ca_batch.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "rcamon/error.hpp"
#include "rcamon/linalg.hpp"

namespace rcamon {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

LagMatrices build_lag_matrices(const MatrixXd& x, std::size_t p) {
    if (p < 1) throw Error(ErrorCode::InvalidArgument, "lag order must be at least 1");
    const Index n = x.rows();
    const Index m = x.cols();
    const auto lag = static_cast<Index>(p);
    if (n <= lag + 1) {
        throw Error(ErrorCode::TooFewSamples,
                    std::to_string(n) + " samples are not enough for lag order " + std::to_string(p));
    }
    const Index rows = n - lag;
    auto dx = [&](Index s) -> Eigen::RowVectorXd {
        if (s == 0) return Eigen::RowVectorXd::Zero(m);
        return x.row(s) - x.row(s - 1);
    };

    LagMatrices out;
    out.levels.resize(rows, m);
    out.diffs.resize(rows, m);
    out.lagged_diffs.resize(rows, lag * m);
    for (Index t = 0; t < rows; ++t) {
        out.levels.row(t) = x.row(t + lag - 1);
        out.diffs.row(t) = x.row(t + lag) - x.row(t + lag - 1);
        for (Index j = 0; j < lag; ++j) out.lagged_diffs.block(t, j * m, 1, m) = dx(t + j);
    }
    return out;
}

OlsFit ols_fit(const LagMatrices& lags) {
    const MatrixXd& z = lags.lagged_diffs;
    const Index dim = z.cols();
    MatrixXd gram = z.transpose() * z;

    OlsFit fit;
    Eigen::LLT<MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
        const double trace = gram.trace();
        if (!(trace > 0.0)) throw Error(ErrorCode::RankDeficient, "lagged differences are identically zero");
        gram.diagonal().array() += kOlsRidge * trace / static_cast<double>(dim);
        llt.compute(gram);
        if (llt.info() != Eigen::Success) {
            throw Error(ErrorCode::RankDeficient, "regularized Gram matrix is still singular");
        }
        fit.regularized = true;
    }
    fit.r = llt.solve(MatrixXd::Identity(dim, dim));
    fit.r = linalg::symmetrize(fit.r);
    fit.theta = fit.r * (z.transpose() * lags.diffs);
    fit.phi = fit.r * (z.transpose() * lags.levels);
    return fit;
}

PredictionErrors prediction_errors(const LagMatrices& lags, const MatrixXd& theta, const MatrixXd& phi) {
    if (theta.rows() != lags.lagged_diffs.cols() || phi.rows() != lags.lagged_diffs.cols() ||
        theta.cols() != lags.diffs.cols() || phi.cols() != lags.levels.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "coefficient shapes do not match the lag matrices");
    }
    return {lags.diffs - lags.lagged_diffs * theta, lags.levels - lags.lagged_diffs * phi};
}

Pencil assemble_ab(const MatrixXd& e0, const MatrixXd& e1) {
    if (e0.rows() != e1.rows() || e0.cols() != e1.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "E0 and E1 must have the same shape");
    }
    if (e0.rows() == 0) throw Error(ErrorCode::TooFewSamples, "empty prediction errors");
    const Index m = e0.cols();
    const double scale = 1.0 / static_cast<double>(e0.rows());
    const MatrixXd s01 = scale * e0.transpose() * e1;

    Pencil out;
    out.a = MatrixXd::Zero(2 * m, 2 * m);
    out.a.topRightCorner(m, m) = s01;
    out.a.bottomLeftCorner(m, m) = s01.transpose();
    out.b = MatrixXd::Zero(2 * m, 2 * m);
    out.b.topLeftCorner(m, m) = linalg::symmetrize(scale * e0.transpose() * e0);
    out.b.bottomRightCorner(m, m) = linalg::symmetrize(scale * e1.transpose() * e1);
    return out;
}

GeneralizedEigen solve_gevd(const MatrixXd& a, const MatrixXd& b) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "pencil matrices must be square and of equal size");
    }
    MatrixXd bj = linalg::symmetrize(b);
    const Eigen::SelfAdjointEigenSolver<MatrixXd> spectrum(bj, Eigen::EigenvaluesOnly);
    const double lo = spectrum.eigenvalues().minCoeff();
    const double hi = spectrum.eigenvalues().maxCoeff();
    if (!(hi > 0.0) || lo < -1e-8 * hi) throw Error(ErrorCode::IndefiniteB, "B is not positive semidefinite");
    if (lo < 1e-10) bj.diagonal().array() += 1e-10 * bj.diagonal().mean();

    const Eigen::LLT<MatrixXd> llt(bj);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::IndefiniteB, "Cholesky factorisation of B failed");
    const auto l = llt.matrixL();
    MatrixXd c = l.solve(linalg::symmetrize(a));
    c = l.solve(c.transpose()).eval();
    const linalg::SymmetricEigen eig = linalg::eig_descending(linalg::symmetrize(c));

    GeneralizedEigen out;
    out.values = eig.values;
    out.vectors = llt.matrixU().solve(eig.vectors);
    return out;
}

namespace {
// Tabulated 5% trace critical values, restricted constant, indexed
// by the number of common trends (1..12).
constexpr std::array<double, 12> kTrace05 = {9.1645,   20.2618,  35.1929,  54.0790,  76.8127,  103.8473,
                                             134.6780, 169.6142, 208.3185, 251.2625, 298.1594, 348.9762};
}  // namespace

double trace_critical_value(std::size_t trends) {
    if (trends < 1 || trends > kTrace05.size()) {
        throw Error(ErrorCode::InvalidArgument, "trace test tabulated for 1..12 variables only");
    }
    return kTrace05[trends - 1];
}

std::size_t trace_test(std::span<const double> squared_correlations, std::size_t effective_samples,
                       double alpha) {
    if (std::abs(alpha - 0.05) > 1e-12) throw Error(ErrorCode::InvalidArgument, "trace test supports alpha = 0.05");
    std::vector<double> lam(squared_correlations.begin(), squared_correlations.end());
    for (double& v : lam) v = std::clamp(v, 0.0, 1.0 - 1e-12);
    std::sort(lam.begin(), lam.end(), std::greater<>());
    const std::size_t m = lam.size();
    const double t = static_cast<double>(effective_samples);
    for (std::size_t h = 0; h < m; ++h) {
        double stat = 0.0;
        for (std::size_t i = h; i < m; ++i) stat -= t * std::log1p(-lam[i]);
        if (stat < trace_critical_value(m - h)) return h;
    }
    return m;
}

std::size_t select_order_aic(const MatrixXd& x, std::size_t p_max) {
    if (p_max < 1) throw Error(ErrorCode::InvalidArgument, "p_max must be at least 1");
    const Index n = x.rows();
    const Index m = x.cols();
    const auto pm = static_cast<Index>(p_max);
    if (n <= 3 * pm * m) {
        throw Error(ErrorCode::TooFewSamples, "order selection needs more than 3*p_max*m samples");
    }
    if (p_max == 1) return 1;

    const MatrixXd dx = x.bottomRows(n - 1) - x.topRows(n - 1);  // dx.row(s - 1) = x_s - x_{s-1}
    const Index first = pm + 1;  // first target sample index
    const Index rows = n - first;

    std::size_t best = 1;
    double best_aic = std::numeric_limits<double>::infinity();
    for (Index p = 1; p <= pm; ++p) {
        MatrixXd reg(rows, m * (p + 1));
        MatrixXd target(rows, m);
        for (Index t = 0; t < rows; ++t) {
            const Index s = first + t;
            target.row(t) = dx.row(s - 1);
            reg.block(t, 0, 1, m) = x.row(s - 1);
            for (Index j = 1; j <= p; ++j) reg.block(t, j * m, 1, m) = dx.row(s - 1 - j);
        }
        const MatrixXd coef = reg.colPivHouseholderQr().solve(target);
        const MatrixXd resid = target - reg * coef;
        const MatrixXd sigma = resid.transpose() * resid / static_cast<double>(rows);
        const Eigen::LLT<MatrixXd> llt(sigma);
        if (llt.info() != Eigen::Success) throw Error(ErrorCode::RankDeficient, "singular residual covariance");
        const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        const double aic = static_cast<double>(rows) * logdet + 2.0 * static_cast<double>(m * m * (p + 1));
        if (aic < best_aic) {
            best_aic = aic;
            best = static_cast<std::size_t>(p);
        }
    }
    return best;
}

void set_cointegration_vectors(CointegrationModel& model, const GeneralizedEigen& ge, std::size_t r) {
    const Index m = ge.vectors.rows() / 2;
    model.w = ge.vectors;
    linalg::fix_column_signs(model.w, m, m);
    model.eigenvalues = ge.values;
    model.r = r;
}

CaFit fit_ca_detailed(const MatrixXd& x1, std::size_t p, std::optional<std::size_t> r_override) {
    const Index m = x1.cols();
    if (m < 2) throw Error(ErrorCode::DimensionMismatch, "cointegration analysis needs at least 2 variables");
    if (!x1.allFinite()) throw Error(ErrorCode::NonFiniteData, "block-1 data contains non-finite values");
    if (r_override && (*r_override < 1 || *r_override > static_cast<std::size_t>(m))) {
        throw Error(ErrorCode::InvalidConfig, "rank override must lie in [1, m1]");
    }

    CaFit fit;
    fit.lags = build_lag_matrices(x1, p);
    const OlsFit ols = ols_fit(fit.lags);
    fit.errors = prediction_errors(fit.lags, ols.theta, ols.phi);
    fit.r = ols.r;
    const Pencil pencil = assemble_ab(fit.errors.e0, fit.errors.e1);
    const GeneralizedEigen ge = solve_gevd(pencil.a, pencil.b);

    std::vector<double> squared(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) {
        const double rho = std::max(ge.values(i), 0.0);
        squared[static_cast<std::size_t>(i)] = rho * rho;
    }
    // With an explicit rank the test is informational and skipped beyond the table.
    if (!r_override || static_cast<std::size_t>(m) <= kTrace05.size()) {
        fit.trace_rank = trace_test(squared, static_cast<std::size_t>(fit.lags.levels.rows()));
    }
    const std::size_t r = r_override.value_or(fit.trace_rank);
    if (r == 0) {
        throw Error(ErrorCode::NoCointegration, "trace test found no cointegration relation among block-1 variables");
    }

    fit.model.p = p;
    fit.model.theta = ols.theta;
    fit.model.phi = ols.phi;
    set_cointegration_vectors(fit.model, ge, r);
    fit.recent = x1.bottomRows(static_cast<Index>(p) + 1);
    return fit;
}

CointegrationModel fit_ca(const MatrixXd& x1, std::size_t p, std::optional<std::size_t> r_override) {
    return fit_ca_detailed(x1, p, r_override).model;
}

}  // namespace rcamon
