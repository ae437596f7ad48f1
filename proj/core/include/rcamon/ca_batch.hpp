#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include <Eigen/Dense>

namespace rcamon {

/// Regression matrices of the error-correction model for a sample matrix with
/// rows x_1..x_N and lag order p. Row t (1-based) holds
///   levels:       x_{t+p-1}
///   diffs:        x_{t+p} - x_{t+p-1}
///   lagged_diffs: [dx_t, ..., dx_{t+p-1}]  (oldest first)
/// The pre-sample difference dx_1 is taken as zero so that every matrix has
/// N - p rows.
struct LagMatrices {
    Eigen::MatrixXd levels;
    Eigen::MatrixXd diffs;
    Eigen::MatrixXd lagged_diffs;
};

LagMatrices build_lag_matrices(const Eigen::MatrixXd& x, std::size_t p);

struct OlsFit {
    Eigen::MatrixXd theta;  // lagged_diffs -> diffs
    Eigen::MatrixXd phi;    // lagged_diffs -> levels
    Eigen::MatrixXd r;      // (lagged_diffs^T lagged_diffs)^-1, possibly ridge-regularized
    bool regularized = false;
};

/// Relative ridge added to the Gram matrix when it is numerically singular.
inline constexpr double kOlsRidge = 1e-8;

OlsFit ols_fit(const LagMatrices& lags);

struct PredictionErrors {
    Eigen::MatrixXd e0;
    Eigen::MatrixXd e1;
};

PredictionErrors prediction_errors(const LagMatrices& lags, const Eigen::MatrixXd& theta,
                                   const Eigen::MatrixXd& phi);

/// The symmetric pencil A = [[0, S01], [S10, 0]], B = blockdiag(S00, S11) with
/// S_ij = E_i^T E_j / rows.
struct Pencil {
    Eigen::MatrixXd a;
    Eigen::MatrixXd b;
};

Pencil assemble_ab(const Eigen::MatrixXd& e0, const Eigen::MatrixXd& e1);

struct GeneralizedEigen {
    Eigen::VectorXd values;   // descending
    Eigen::MatrixXd vectors;  // B-orthonormal: W^T B W = I
};

/// Solves A w = lambda B w through a Cholesky factor of B.
GeneralizedEigen solve_gevd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// 5% critical value of the trace statistic with (variables - rank) common
/// trends, restricted constant. Valid for 1..12.
double trace_critical_value(std::size_t trends);

/// Cointegration rank from squared canonical correlations (descending).
/// `effective_samples` is N - p. Only the 5% level is tabulated.
std::size_t trace_test(std::span<const double> squared_correlations, std::size_t effective_samples,
                       double alpha = 0.05);

/// Lag order in [1, p_max] minimising AIC of the unrestricted error-correction
/// regression, all candidates evaluated on a common sample.
std::size_t select_order_aic(const Eigen::MatrixXd& x, std::size_t p_max);

struct CointegrationModel {
    Eigen::MatrixXd w;            // 2m x 2m, all generalized eigenvectors, [be; bf] row blocks
    Eigen::VectorXd eigenvalues;  // 2m, descending
    std::size_t p = 0;
    std::size_t r = 0;
    Eigen::MatrixXd theta;        // pm x m, lagged differences -> differences
    Eigen::MatrixXd phi;          // pm x m, lagged differences -> levels

    [[nodiscard]] Eigen::Index variables() const noexcept { return w.rows() / 2; }
    /// Cointegration matrix (levels side), m x r.
    [[nodiscard]] Eigen::MatrixXd bf() const { return w.bottomLeftCorner(variables(), static_cast<Eigen::Index>(r)); }
    /// Dynamic cointegration matrix (differences side), m x r.
    [[nodiscard]] Eigen::MatrixXd be() const { return w.topLeftCorner(variables(), static_cast<Eigen::Index>(r)); }
};

/// Everything the batch fit produced; the recursive analyser starts from this.
struct CaFit {
    CointegrationModel model;
    LagMatrices lags;
    PredictionErrors errors;
    Eigen::MatrixXd r;
    Eigen::MatrixXd recent;  // last p + 1 rows of the input
    std::size_t trace_rank = 0;  // 0 also when a rank override skipped an untabulated test
};

/// Splits the generalized eigenvectors into cointegration matrices, keeping
/// the first r columns, and fixes column signs on the levels block.
void set_cointegration_vectors(CointegrationModel& model, const GeneralizedEigen& ge, std::size_t r);

/// Batch cointegration analysis of scaled block-1 data. Throws NoCointegration
/// if the trace test finds no relation and no override is given.
CaFit fit_ca_detailed(const Eigen::MatrixXd& x1, std::size_t p, std::optional<std::size_t> r_override = {});
CointegrationModel fit_ca(const Eigen::MatrixXd& x1, std::size_t p, std::optional<std::size_t> r_override = {});

}  // namespace rcamon
