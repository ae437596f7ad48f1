#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rcamon/rpca_stream.hpp"

namespace rcamon {

struct StatRecord {
    double t2f = 0.0;  // static equilibrium
    double t2e = 0.0;  // dynamic equilibrium
    double t2 = 0.0;   // principal subspace of the remaining variables
    double spe = 0.0;  // residual subspace of the remaining variables
    std::int64_t index = 0;
};

struct Thresholds {
    double t2f = 0.0;
    double t2e = 0.0;
    double t2 = 0.0;
    double spe = 0.0;
    double quantile = 0.99;
};

enum class MonitorStatus { Normal, NewMode, PotentialFault, Fault };

std::string_view to_string(MonitorStatus status) noexcept;
std::optional<MonitorStatus> parse_status(std::string_view text) noexcept;

/// PotentialFault and Fault raise an alarm; Normal and NewMode do not.
[[nodiscard]] constexpr bool is_alarm(MonitorStatus s) noexcept {
    return s == MonitorStatus::PotentialFault || s == MonitorStatus::Fault;
}

/// I - B (B^T B)^-1 B^T, the projector onto the complement of span(B).
Eigen::MatrixXd complement_projector(const Eigen::MatrixXd& b);

/// T^2 and SPE of a standardised sample against the retained l components.
struct PcaScores {
    double t2 = 0.0;
    double spe = 0.0;
};

PcaScores pca_scores(const Eigen::RowVectorXd& z, const RpcaState& rpca);

/// Silverman's rule 0.9 min(sd, IQR / 1.34) n^(-1/5), falling back to the
/// nonzero spread measure (or a small absolute width) for degenerate samples.
double silverman_bandwidth(std::span<const double> values);

/// Quantile of the Gaussian kernel density estimate of `values`, found by
/// bisection on its CDF. Never below the smallest value.
double kde_threshold(std::span<const double> values, double quantile);

Thresholds kde_thresholds(std::span<const StatRecord> records, double quantile);

struct ClassifierConfig {
    std::size_t persist_n = 5;   // consecutive exceedances that make a fault
    std::size_t confirm_n = 20;  // consecutive equilibrium exceedances that make a new mode
};

struct ClassifierCounters {
    std::size_t abnormal_run = 0;  // samples with any of t2e, t2, spe above limit
    std::size_t fault_run = 0;     // samples with all four above limit
    std::size_t newmode_run = 0;   // samples with t2f above limit
    std::size_t clear_run = 0;     // samples with every statistic below limit
    MonitorStatus latched = MonitorStatus::Normal;  // alarm held until cleared
};

struct Exceedance {
    bool t2f = false;
    bool t2e = false;
    bool t2 = false;
    bool spe = false;

    [[nodiscard]] bool any() const noexcept { return t2f || t2e || t2 || spe; }
    [[nodiscard]] bool all() const noexcept { return t2f && t2e && t2 && spe; }
};

Exceedance exceedance(const StatRecord& rec, const Thresholds& thr) noexcept;

/// Four-rule status decision with persistence filtering. Counters carry the
/// run lengths from call to call. A new mode is declared once t2f has stayed
/// above its limit for confirm_n samples and the other three are back below.
/// A raised alarm is held until all four statistics have been below their
/// limits for persist_n consecutive samples.
MonitorStatus classify(const StatRecord& rec, const Thresholds& thr, ClassifierCounters& counters,
                       const ClassifierConfig& config = {});

struct SegmentMetrics {
    std::optional<double> fdr;  // absent without faulty samples
    std::optional<double> far;  // absent without normal samples
    std::optional<std::size_t> dd;
    std::size_t onset = 0;
};

/// Fault detection rate, false alarm rate and detection delay of an alarm
/// sequence against ground-truth labels. The delay is measured from the first
/// faulty label.
SegmentMetrics evaluate(const std::vector<bool>& alarms, const std::vector<bool>& faulty);

/// One fault segment per maximal run of faulty labels. FAR of a segment is
/// measured on the normal samples between the previous segment and this one.
std::vector<SegmentMetrics> evaluate_segments(const std::vector<bool>& alarms, const std::vector<bool>& faulty);

}  // namespace rcamon
