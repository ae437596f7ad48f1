#include "rcamon/rca_stream.hpp"

#include <algorithm>
#include <cmath>

#include "rcamon/error.hpp"
#include "rcamon/linalg.hpp"

namespace rcamon {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

namespace {

std::size_t count(const MatrixXd& x) { return static_cast<std::size_t>(x.size()); }
std::size_t count(const VectorXd& x) { return static_cast<std::size_t>(x.size()); }
std::size_t count(const RowVectorXd& x) { return static_cast<std::size_t>(x.size()); }

Index idx(std::size_t v) { return static_cast<Index>(v); }

}  // namespace

std::size_t rca_footprint(const RcaState& s) {
    return count(s.r) + count(s.jtj) + count(s.jte0) + count(s.jte1) + count(s.a) + count(s.b) + count(s.k1) +
           count(s.k2) + count(s.window) + count(s.e0_last) + count(s.model.w) + count(s.model.eigenvalues) +
           count(s.model.theta) + count(s.model.phi);
}

std::size_t rca_footprint(std::size_t m, std::size_t p) {
    const std::size_t pm = p * m;
    return 2 * pm * pm            // r, jtj
           + 4 * pm * m           // jte0, jte1, theta, phi
           + 2 * (4 * m * m)      // a, b
           + 2 * m * m            // k1, k2
           + (p + 1) * m + m      // window, e0_last
           + 4 * m * m + 2 * m;   // w, eigenvalues
}

RcaState rca_init(const CaFit& fit, const RcaOptions& options) {
    const MatrixXd& z = fit.lags.lagged_diffs;
    RcaState s;
    s.m = static_cast<std::size_t>(fit.lags.levels.cols());
    s.p = fit.model.p;
    s.options = options;
    s.model = fit.model;
    s.r = fit.r;
    const MatrixXd j = z * fit.r;
    s.jtj = linalg::symmetrize(j.transpose() * j);
    s.jte0 = j.transpose() * fit.errors.e0;
    s.jte1 = j.transpose() * fit.errors.e1;
    const Pencil pencil = assemble_ab(fit.errors.e0, fit.errors.e1);
    s.a = pencil.a;
    s.b = pencil.b;
    const Index m = idx(s.m);
    s.k1 = linalg::inv_sqrt_symmetric(s.b.topLeftCorner(m, m));
    s.k2 = linalg::inv_sqrt_symmetric(s.b.bottomRightCorner(m, m));
    s.window = fit.recent;
    s.e0_last = fit.errors.e0.row(fit.errors.e0.rows() - 1);
    s.rows = static_cast<std::size_t>(fit.errors.e0.rows());
    return s;
}

RcaRegressors rca_regressors(const RcaState& s, const RowVectorXd& x) {
    const Index m = idx(s.m);
    const Index p = idx(s.p);
    if (x.size() != m) throw Error(ErrorCode::DimensionMismatch, "block-1 sample has the wrong length");
    RcaRegressors out;
    out.lagged.resize(p * m);
    for (Index j = 0; j < p; ++j) out.lagged.segment(j * m, m) = s.window.row(j + 1) - s.window.row(j);
    out.level = s.window.row(p);
    out.diff = x - out.level;
    return out;
}

RlsStep rls_update(RcaState& s, const RowVectorXd& lagged, const RowVectorXd& diff, const RowVectorXd& level) {
    RlsStep st;
    st.lagged = lagged;
    st.r_old = s.r;
    const VectorXd v = s.r * lagged.transpose();
    st.c = lagged.dot(v);
    const double denom = 1.0 + st.c;
    if (!(denom >= 1e-12)) throw Error(ErrorCode::NumericalBreakdown, "1 + c collapsed in the recursive OLS update");
    st.d = (diff - lagged * s.model.theta) / denom;
    st.h = (level - lagged * s.model.phi) / denom;
    st.g0 = lagged * s.jte0;
    st.g1 = lagged * s.jte1;
    st.s = lagged * s.jtj * lagged.transpose();

    s.r -= v * v.transpose() / denom;
    s.r = linalg::symmetrize(s.r);
    s.model.theta += v * st.d;
    s.model.phi += v * st.h;
    return st;
}

void update_error_products(RcaState& s, const RlsStep& st) {
    const Index dim = st.r_old.rows();
    const VectorXd v = st.r_old * st.lagged.transpose();
    // J~ = I - lagged^T lagged R_old / (1 + c) = I - lagged^T v^T / (1 + c)
    MatrixXd jt = MatrixXd::Identity(dim, dim);
    jt.noalias() -= st.lagged.transpose() * v.transpose() / (1.0 + st.c);

    const VectorXd jtj_phi = s.jtj * st.lagged.transpose();
    const MatrixXd inner1 = s.jte1 - jtj_phi * st.h + v * st.h;
    const MatrixXd inner0 = s.jte0 - jtj_phi * st.d + v * st.d;
    const VectorXd vj = jt.transpose() * v;
    s.jtj = linalg::symmetrize(jt.transpose() * s.jtj * jt + vj * vj.transpose());
    s.jte1 = jt.transpose() * inner1;
    s.jte0 = jt.transpose() * inner0;
    s.e0_last = st.d;
}

PencilUpdate update_ab(RcaState& s, const RlsStep& st) {
    const Index m = idx(s.m);
    PencilUpdate u;
    u.alpha = static_cast<double>(s.rows) / static_cast<double>(s.rows + 1);
    const MatrixXd dh = st.d.transpose() * st.h;
    u.da1 = -st.d.transpose() * st.g1 - st.g0.transpose() * st.h + st.s * dh + dh;
    const MatrixXd dd = st.d.transpose() * st.d;
    const MatrixXd dg = st.d.transpose() * st.g0;
    u.db1 = linalg::symmetrize(st.s * dd - dg - dg.transpose() + dd);
    const MatrixXd hh = st.h.transpose() * st.h;
    const MatrixXd hg = st.h.transpose() * st.g1;
    u.db2 = linalg::symmetrize(st.s * hh - hg - hg.transpose() + hh);

    const double a = u.alpha;
    const MatrixXd a01 = a * s.a.topRightCorner(m, m) + (1.0 - a) * u.da1;
    s.a.topRightCorner(m, m) = a01;
    s.a.bottomLeftCorner(m, m) = a01.transpose();
    s.b.topLeftCorner(m, m) = linalg::symmetrize(a * s.b.topLeftCorner(m, m) + (1.0 - a) * u.db1);
    s.b.bottomRightCorner(m, m) = linalg::symmetrize(a * s.b.bottomRightCorner(m, m) + (1.0 - a) * u.db2);
    ++s.rows;
    return u;
}

InvSqrtUpdate update_k_block(const MatrixXd& k, const MatrixXd& db, double alpha, double rank_tol) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
    const Index m = k.rows();
    const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
    const double f = (1.0 - alpha) / alpha;

    const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(linalg::symmetrize(db));
    if (eig.info() != Eigen::Success) throw Error(ErrorCode::NumericalBreakdown, "eigensolver failed on block update");
    // Two eigenvalues of largest magnitude.
    Index i1 = 0;
    for (Index i = 1; i < m; ++i) {
        if (std::abs(eig.eigenvalues()(i)) > std::abs(eig.eigenvalues()(i1))) i1 = i;
    }
    Index i2 = i1 == 0 ? 1 : 0;
    for (Index i = 0; i < m; ++i) {
        if (i != i1 && std::abs(eig.eigenvalues()(i)) > std::abs(eig.eigenvalues()(i2))) i2 = i;
    }
    const double beta1 = eig.eigenvalues()(i1);
    const double beta2 = m > 1 ? eig.eigenvalues()(i2) : 0.0;

    InvSqrtUpdate out;
    if (beta1 == 0.0) {
        out.k = k * inv_sqrt_alpha;
        return out;
    }

    const VectorXd q1 = k * eig.eigenvectors().col(i1);
    const double n1 = q1.squaredNorm();
    const double lam1 = 1.0 + f * beta1 * n1;
    if (!(lam1 > 0.0)) throw Error(ErrorCode::IndefiniteBlock, "updated block is not positive definite");

    if (m == 1 || std::abs(beta2) <= rank_tol * std::abs(beta1)) {
        const double gamma = (1.0 / std::sqrt(lam1) - 1.0) / n1;
        out.k = (k + gamma * q1 * (q1.transpose() * k)) * inv_sqrt_alpha;
        return out;
    }

    // Rank two. The first modification of I is exact: eigenvector u1 = q1/|q1|
    // with eigenvalue lam1, every vector orthogonal to u1 keeps eigenvalue 1.
    // The orthogonal complement is degenerate, so its basis is chosen with the
    // second perturbation vector along a single direction u2; the second
    // modification is then a first-order perturbation on span{u1, u2} and
    // leaves the rest of the space untouched.
    out.rank2 = true;
    const VectorXd q2 = k * eig.eigenvectors().col(i2);
    const double b2 = f * beta2;
    const VectorXd u1 = q1 / std::sqrt(n1);
    const double kappa1 = u1.dot(q2);
    VectorXd rest = q2 - kappa1 * u1;
    const double kappa2 = rest.norm();

    MatrixXd basis(m, 2);
    Eigen::Vector2d lam;
    if (kappa2 <= 1e-14 * q2.norm()) {
        basis.resize(m, 1);
        basis.col(0) = u1;
        const double l = lam1 + b2 * kappa1 * kappa1;
        if (!(l > 0.0)) throw Error(ErrorCode::IndefiniteBlock, "updated block is not positive definite");
        out.k = (k + (1.0 / std::sqrt(l) - 1.0) * u1 * (u1.transpose() * k)) * inv_sqrt_alpha;
        return out;
    }
    basis.col(0) = u1;
    basis.col(1) = rest / kappa2;
    lam << lam1 + b2 * kappa1 * kappa1, 1.0 + b2 * kappa2 * kappa2;
    if (!(lam.minCoeff() > 0.0)) throw Error(ErrorCode::IndefiniteBlock, "updated block is not positive definite");

    Eigen::Matrix2d qv = Eigen::Matrix2d::Identity();
    const double gap = lam(1) - lam(0);
    if (std::abs(gap) > 1e-12) {
        qv(0, 1) = b2 * kappa1 * kappa2 / gap;
        qv(1, 0) = -qv(0, 1);
    }
    MatrixXd rotated = basis * qv;
    rotated = linalg::orthonormalize(rotated);
    const Eigen::Vector2d shrink = lam.array().rsqrt() - 1.0;
    out.k = (k + rotated * shrink.asDiagonal() * (rotated.transpose() * k)) * inv_sqrt_alpha;
    return out;
}

KUpdateReport update_k_inv_sqrt(RcaState& s, const PencilUpdate& delta) {
    const Index m = idx(s.m);
    s.k1 = update_k_block(s.k1, delta.db1, delta.alpha, s.options.rank_tol).k;
    s.k2 = update_k_block(s.k2, delta.db2, delta.alpha, s.options.rank_tol).k;
    ++s.steps_since_refresh;

    auto defect = [&] {
        const double d1 = linalg::whitening_defect(s.k1, s.b.topLeftCorner(m, m));
        const double d2 = linalg::whitening_defect(s.k2, s.b.bottomRightCorner(m, m));
        return std::sqrt(d1 * d1 + d2 * d2);
    };

    KUpdateReport rep;
    rep.defect = defect();
    const bool drifted = s.options.exact_fallback && !(rep.defect <= s.options.drift_tol);
    const bool due = s.options.refresh_period > 0 && s.steps_since_refresh >= s.options.refresh_period;
    if (drifted || due) {
        s.k1 = linalg::inv_sqrt_symmetric(s.b.topLeftCorner(m, m));
        s.k2 = linalg::inv_sqrt_symmetric(s.b.bottomRightCorner(m, m));
        s.steps_since_refresh = 0;
        rep.exact = true;
        rep.defect = defect();
    }
    return rep;
}

void rca_solve(RcaState& s) {
    const Index m = idx(s.m);
    MatrixXd c = MatrixXd::Zero(2 * m, 2 * m);
    const MatrixXd c01 = s.k1 * s.a.topRightCorner(m, m) * s.k2.transpose();
    c.topRightCorner(m, m) = c01;
    c.bottomLeftCorner(m, m) = c01.transpose();
    const linalg::SymmetricEigen eig = linalg::eig_descending(c);

    GeneralizedEigen ge;
    ge.values = eig.values;
    ge.vectors.resize(2 * m, 2 * m);
    ge.vectors.topRows(m) = s.k1.transpose() * eig.vectors.topRows(m);
    ge.vectors.bottomRows(m) = s.k2.transpose() * eig.vectors.bottomRows(m);
    set_cointegration_vectors(s.model, ge, s.model.r);
}

RowVectorXd rca_prediction_error(const RcaState& s, const RowVectorXd& x) {
    const RcaRegressors reg = rca_regressors(s, x);
    const double c = reg.lagged.dot(s.r * reg.lagged.transpose());
    return (reg.diff - reg.lagged * s.model.theta) / (1.0 + c);
}

void rca_observe(RcaState& s, const RowVectorXd& x) {
    if (x.size() != idx(s.m)) throw Error(ErrorCode::DimensionMismatch, "block-1 sample has the wrong length");
    const Index p = idx(s.p);
    for (Index i = 0; i < p; ++i) s.window.row(i) = s.window.row(i + 1);
    s.window.row(p) = x;
}

RcaStepReport rca_step(RcaState& s, const RowVectorXd& x) {
    if (!x.allFinite()) throw Error(ErrorCode::NonFiniteData, "block-1 sample is not finite");
    const RcaRegressors reg = rca_regressors(s, x);
    const RlsStep st = rls_update(s, reg.lagged, reg.diff, reg.level);
    update_error_products(s, st);
    const PencilUpdate delta = update_ab(s, st);
    RcaStepReport rep;
    rep.k = update_k_inv_sqrt(s, delta);
    rca_solve(s);
    rca_observe(s, x);
    rep.e0 = st.d;
    return rep;
}

}  // namespace rcamon
