#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "rcamon/ingest.hpp"

namespace rcamon {

/// How the eigenvalue increment of the first-order update is formed from the
/// projection kappa = P^T x: squared (trace preserving) or the literal kappa.
enum class FopLambdaMode { Squared, Literal };

struct RpcaOptions {
    double cpv = 0.85;
    std::size_t reorth_period = 50;
    double reorth_tol = 1e-6;
    double gap_tol = 1e-10;
    FopLambdaMode lambda_mode = FopLambdaMode::Squared;
    /// Caps the sample count used for the weights alpha = k / (k + 1), turning
    /// the cumulative average into exponential forgetting (0 = never cap).
    std::size_t memory = 0;
};

struct RpcaState {
    Scaler scaler;           // running mean / std of the raw input
    Eigen::MatrixXd p;       // m x m eigenvectors, columns ordered by lambda
    Eigen::VectorXd lambda;  // descending
    std::size_t l = 1;
    std::size_t k = 0;
    std::size_t steps_since_reorth = 0;
    bool reorth_pending = false;
    RpcaOptions options;

    [[nodiscard]] Eigen::Index dim() const noexcept { return p.rows(); }
    [[nodiscard]] Eigen::MatrixXd retained() const { return p.leftCols(static_cast<Eigen::Index>(l)); }
};

/// Smallest l whose leading eigenvalues explain at least `threshold` of the
/// total. Throws AllZeroSpectrum when every eigenvalue is zero.
std::size_t cpv_select(const Eigen::VectorXd& lambda, double threshold);

/// Standard deviations below this are replaced by 1 so that structurally
/// constant inputs (e.g. annihilated directions) pass through unscaled.
inline constexpr double kRpcaMinStd = 1e-6;

/// PCA of `x` (raw PCA input, one sample per row) with its own standardisation.
RpcaState rpca_init(const Eigen::MatrixXd& x, const RpcaOptions& options = {});

/// Builds a state from an explicit eigen-system (used after a regularised
/// retrain). Columns of `p` need not be sorted.
RpcaState rpca_from_eigensystem(const Scaler& scaler, const Eigen::MatrixXd& p, const Eigen::VectorXd& lambda,
                                std::size_t l, std::size_t k, const RpcaOptions& options = {});

/// Standardises a raw sample with the current running scaler.
Eigen::RowVectorXd rpca_scale(const RpcaState& state, const Eigen::RowVectorXd& x);

/// Sample count behind the current weights, k or the memory cap.
std::size_t effective_memory(const RpcaState& state) noexcept;

/// First-order-perturbation eigen-update with an already standardised sample.
void rpca_update(RpcaState& state, const Eigen::RowVectorXd& z);

/// Updates the running scaler with a raw sample, standardises it and applies
/// rpca_update. Returns the standardised sample.
Eigen::RowVectorXd rpca_observe(RpcaState& state, const Eigen::RowVectorXd& x);

/// Covariance implied by the current eigen-system, P diag(lambda) P^T.
Eigen::MatrixXd rpca_covariance(const RpcaState& state);

}  // namespace rcamon
