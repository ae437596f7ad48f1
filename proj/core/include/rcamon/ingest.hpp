#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rcamon {

/// N x m block of measurements, one sample per row.
struct DataMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> variable_names;
    double sample_interval_s = 1.0;

    [[nodiscard]] Eigen::Index samples() const noexcept { return values.rows(); }
    [[nodiscard]] Eigen::Index variables() const noexcept { return values.cols(); }

    /// Checks N >= 2, m >= 2, finite entries and a matching name list.
    void validate() const;
};

/// Column indices (0-based) of the three variable blocks: common-trend
/// variables analysed by cointegration, stationary manipulated variables, and
/// everything else.
struct VariableGrouping {
    std::vector<Eigen::Index> block1;
    std::vector<Eigen::Index> block2;
    std::vector<Eigen::Index> block3;

    void validate(Eigen::Index variable_count) const;
};

/// Gathers the listed columns of `x` into a new matrix.
Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, std::span<const Eigen::Index> columns);
Eigen::RowVectorXd select_columns(const Eigen::RowVectorXd& x, std::span<const Eigen::Index> columns);

struct Scaler {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd std;

    [[nodiscard]] Eigen::Index size() const noexcept { return mean.size(); }
};

inline constexpr double kConstantColumnVariance = 1e-12;

/// Column means and unbiased (N-1) standard deviations.
Scaler fit_scaler(const Eigen::MatrixXd& x);
Scaler fit_scaler(const DataMatrix& x);

Eigen::MatrixXd scale(const Scaler& s, const Eigen::MatrixXd& x);
Eigen::RowVectorXd scale(const Scaler& s, const Eigen::RowVectorXd& x);
DataMatrix scale(const Scaler& s, const DataMatrix& x);
Eigen::MatrixXd unscale(const Scaler& s, const Eigen::MatrixXd& x);

/// Folds sample `x` into a scaler that summarises `k` previous samples:
/// mean' = a*mean + (1-a)*x and var' = a*var + (1-a)*(x - mean')^2 with
/// a = k/(k+1).
Scaler update_scaler(const Scaler& s, const Eigen::RowVectorXd& x, std::size_t k);

struct AdfResult {
    double statistic = 0.0;
    double critical_value = 0.0;
    std::size_t lags = 0;
    std::size_t observations = 0;
    bool stationary = false;
};

/// Augmented Dickey-Fuller test with intercept. The lag order is picked by AIC
/// over 0..max_lag on a common sample, then the regression is refitted on all
/// usable observations. `alpha` must be 0.01, 0.05 or 0.10.
AdfResult adf_test(std::span<const double> series, std::size_t max_lag, double alpha = 0.05);

/// Response-surface critical value of the ADF statistic, constant-only case.
double adf_critical_value(double alpha, std::size_t observations);

/// Comma-separated, first row holds variable names, one sample per row.
DataMatrix read_csv(std::istream& in);
DataMatrix read_csv(const std::string& path);
void write_csv(std::ostream& out, const DataMatrix& data);
void write_csv(const std::string& path, const DataMatrix& data);

}  // namespace rcamon
