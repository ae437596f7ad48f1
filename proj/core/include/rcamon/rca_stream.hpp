#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "rcamon/ca_batch.hpp"

namespace rcamon {

struct RcaOptions {
    /// Whitening defect ||K B K^T - I||_F above which K is recomputed exactly.
    double drift_tol = 1e-8;
    /// Unconditional exact recomputation of K every this many steps (0 = never).
    std::size_t refresh_period = 500;
    /// When false, the recursive K is kept whatever its defect.
    bool exact_fallback = true;
    /// Second eigenvalue of a block update counts as zero below this fraction of the first.
    double rank_tol = 1e-10;
};

/// Fixed-size state of the recursive cointegration analyser. Every member has
/// a size determined by (m, p) alone.
struct RcaState {
    std::size_t m = 0;
    std::size_t p = 0;
    Eigen::MatrixXd r;      // pm x pm inverse Gram of the lagged differences
    Eigen::MatrixXd jtj;    // pm x pm
    Eigen::MatrixXd jte0;   // pm x m
    Eigen::MatrixXd jte1;   // pm x m
    Eigen::MatrixXd a;      // 2m x 2m
    Eigen::MatrixXd b;      // 2m x 2m
    Eigen::MatrixXd k1;     // m x m, K = blockdiag(k1, k2) whitens B
    Eigen::MatrixXd k2;     // m x m
    Eigen::MatrixXd window;  // (p + 1) x m most recent samples, oldest first
    Eigen::RowVectorXd e0_last;
    std::size_t rows = 0;  // rows of the (never materialised) prediction-error matrices
    std::size_t steps_since_refresh = 0;
    CointegrationModel model;  // also holds theta and phi
    RcaOptions options;
};

/// Number of doubles held by the state; depends only on (m, p).
std::size_t rca_footprint(const RcaState& state);
std::size_t rca_footprint(std::size_t m, std::size_t p);

RcaState rca_init(const CaFit& fit, const RcaOptions& options = {});

/// Regressor row and targets for the sample `x` given the current window.
struct RcaRegressors {
    Eigen::RowVectorXd lagged;  // [dx_{n-p}, ..., dx_{n-1}]
    Eigen::RowVectorXd diff;    // x - x_{n-1}
    Eigen::RowVectorXd level;   // x_{n-1}
};

RcaRegressors rca_regressors(const RcaState& state, const Eigen::RowVectorXd& x);

/// Per-step intermediates of the recursive least-squares update. The g/s
/// products are taken against the error products before they are updated.
struct RlsStep {
    Eigen::RowVectorXd lagged;
    Eigen::MatrixXd r_old;
    double c = 0.0;
    Eigen::RowVectorXd d;   // newest row of E0
    Eigen::RowVectorXd h;   // newest row of E1
    Eigen::RowVectorXd g0;  // lagged * J^T E0
    Eigen::RowVectorXd g1;  // lagged * J^T E1
    double s = 0.0;         // lagged * J^T J * lagged^T
};

/// Sherman-Morrison update of R and the coefficient updates for theta and phi.
RlsStep rls_update(RcaState& state, const Eigen::RowVectorXd& lagged, const Eigen::RowVectorXd& diff,
                   const Eigen::RowVectorXd& level);

/// Advances J^T J, J^T E0, J^T E1 and the latest prediction-error row.
void update_error_products(RcaState& state, const RlsStep& step);

struct PencilUpdate {
    Eigen::MatrixXd da1;  // m x m off-diagonal block of the increment of A
    Eigen::MatrixXd db1;  // m x m
    Eigen::MatrixXd db2;  // m x m
    double alpha = 0.0;
};

/// A <- alpha A + (1 - alpha) dA and likewise for B, alpha = rows / (rows + 1).
PencilUpdate update_ab(RcaState& state, const RlsStep& step);

struct InvSqrtUpdate {
    Eigen::MatrixXd k;
    bool rank2 = false;
};

/// One block of the recursion K' = alpha^{-1/2} (I + (1-alpha)/alpha K dB K^T)^{-1/2} K.
/// Rank-1 increments are handled in closed form, rank-2 increments by two
/// successive first-order-perturbation rank-1 modifications.
InvSqrtUpdate update_k_block(const Eigen::MatrixXd& k, const Eigen::MatrixXd& db, double alpha,
                             double rank_tol = 1e-10);

struct KUpdateReport {
    double defect = 0.0;  // ||K B K^T - I||_F after the step
    bool exact = false;   // K was recomputed from B
};

KUpdateReport update_k_inv_sqrt(RcaState& state, const PencilUpdate& delta);

struct RcaStepReport {
    KUpdateReport k;
    Eigen::RowVectorXd e0;
};

/// Newest prediction-error row the sample would produce, without changing the state.
Eigen::RowVectorXd rca_prediction_error(const RcaState& state, const Eigen::RowVectorXd& x);

/// Pushes `x` into the lag window only; the fitted model is untouched.
void rca_observe(RcaState& state, const Eigen::RowVectorXd& x);

/// Full recursive update with sample `x` (scaled block-1 values).
RcaStepReport rca_step(RcaState& state, const Eigen::RowVectorXd& x);

/// Recomputes the cointegration vectors from the current A and K.
void rca_solve(RcaState& state);

}  // namespace rcamon
