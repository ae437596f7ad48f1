#include <cmath>
#include <limits>
#include <vector>

#include "rcamon/error.hpp"
#include "rcamon/ingest.hpp"

namespace rcamon {

namespace {

struct AdfFit {
    double statistic = 0.0;
    double ssr = 0.0;
    std::size_t observations = 0;
    std::size_t regressors = 0;
    bool degenerate = false;
};

// Regression of dy[t] on [1, y[t], dy[t-1..t-lags]] for t in [first, dy.size()).
// dy[t] = y[t+1] - y[t], so y[t] is the lagged level for dy[t].
AdfFit fit_adf(std::span<const double> y, const std::vector<double>& dy, std::size_t lags, std::size_t first) {
    const std::size_t n = dy.size() - first;
    const std::size_t k = 2 + lags;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    Eigen::VectorXd target(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t t = first + i;
        const auto row = static_cast<Eigen::Index>(i);
        target(row) = dy[t];
        x(row, 0) = 1.0;
        x(row, 1) = y[t];
        for (std::size_t j = 1; j <= lags; ++j) x(row, static_cast<Eigen::Index>(1 + j)) = dy[t - j];
    }

    AdfFit fit;
    fit.observations = n;
    fit.regressors = k;
    const Eigen::MatrixXd gram = x.transpose() * x;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    const Eigen::VectorXd coef = ldlt.solve(x.transpose() * target);
    fit.ssr = (target - x * coef).squaredNorm();

    Eigen::VectorXd unit = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    unit(1) = 1.0;
    const double var_factor = ldlt.solve(unit)(1);
    const double s2 = fit.ssr / static_cast<double>(n - k);
    const double se = std::sqrt(s2 * var_factor);
    if (ldlt.info() != Eigen::Success || !std::isfinite(se) || se <= 0.0 || !std::isfinite(coef(1))) {
        fit.degenerate = true;
        return fit;
    }
    fit.statistic = coef(1) / se;
    return fit;
}

}  // namespace

double adf_critical_value(double alpha, std::size_t observations) {
    const double t = static_cast<double>(observations);
    auto surface = [t](double b0, double b1, double b2, double b3) {
        return b0 + b1 / t + b2 / (t * t) + b3 / (t * t * t);
    };
    if (std::abs(alpha - 0.01) < 1e-12) return surface(-3.43035, -6.5393, -16.786, -79.433);
    if (std::abs(alpha - 0.05) < 1e-12) return surface(-2.86154, -2.8903, -4.234, -40.040);
    if (std::abs(alpha - 0.10) < 1e-12) return surface(-2.56677, -1.5384, -2.809, 0.0);
    throw Error(ErrorCode::InvalidArgument, "ADF level must be 0.01, 0.05 or 0.10");
}

AdfResult adf_test(std::span<const double> series, std::size_t max_lag, double alpha) {
    if (series.size() <= 3 * (max_lag + 2)) {
        throw Error(ErrorCode::SeriesTooShort, "series of length " + std::to_string(series.size()) +
                                                   " is too short for max_lag " + std::to_string(max_lag));
    }
    for (double v : series) {
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteData, "series contains non-finite values");
    }
    (void)adf_critical_value(alpha, 100);  // validates alpha before doing any work

    std::vector<double> dy(series.size() - 1);
    for (std::size_t t = 0; t + 1 < series.size(); ++t) dy[t] = series[t + 1] - series[t];

    std::size_t best_lag = 0;
    double best_aic = std::numeric_limits<double>::infinity();
    for (std::size_t lag = 0; lag <= max_lag; ++lag) {
        const AdfFit fit = fit_adf(series, dy, lag, max_lag);
        if (fit.degenerate || fit.ssr <= 0.0) continue;
        const double n = static_cast<double>(fit.observations);
        const double aic = n * std::log(fit.ssr / n) + 2.0 * static_cast<double>(fit.regressors);
        if (aic < best_aic) {
            best_aic = aic;
            best_lag = lag;
        }
    }

    const AdfFit fit = fit_adf(series, dy, best_lag, best_lag);
    AdfResult result;
    result.lags = best_lag;
    result.observations = fit.observations;
    result.critical_value = adf_critical_value(alpha, fit.observations);
    if (fit.degenerate) return result;
    result.statistic = fit.statistic;
    result.stationary = fit.statistic < result.critical_value;
    return result;
}

}  // namespace rcamon
