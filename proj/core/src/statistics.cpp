#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rcamon/error.hpp"
#include "rcamon/monitor.hpp"

namespace rcamon {

using Eigen::Index;
using Eigen::MatrixXd;

std::string_view to_string(MonitorStatus status) noexcept {
    switch (status) {
        case MonitorStatus::Normal: return "Normal";
        case MonitorStatus::NewMode: return "NewMode";
        case MonitorStatus::PotentialFault: return "PotentialFault";
        case MonitorStatus::Fault: return "Fault";
    }
    return "Unknown";
}

std::optional<MonitorStatus> parse_status(std::string_view text) noexcept {
    for (auto s : {MonitorStatus::Normal, MonitorStatus::NewMode, MonitorStatus::PotentialFault, MonitorStatus::Fault}) {
        if (to_string(s) == text) return s;
    }
    return std::nullopt;
}

MatrixXd complement_projector(const MatrixXd& b) {
    const Index m = b.rows();
    const MatrixXd gram = b.transpose() * b;
    const Eigen::LLT<MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
        throw Error(ErrorCode::RankDeficient, "cointegration matrix is rank deficient");
    }
    MatrixXd proj = MatrixXd::Identity(m, m) - b * llt.solve(b.transpose());
    return 0.5 * (proj + proj.transpose());
}

PcaScores pca_scores(const Eigen::RowVectorXd& z, const RpcaState& rpca) {
    const auto l = static_cast<Index>(rpca.l);
    const Eigen::VectorXd kappa = rpca.p.leftCols(l).transpose() * z.transpose();
    const double floor = 1e-12 * std::max(rpca.lambda(0), 1e-300);
    PcaScores out;
    for (Index i = 0; i < l; ++i) out.t2 += kappa(i) * kappa(i) / std::max(rpca.lambda(i), floor);
    out.spe = std::max(z.squaredNorm() - kappa.squaredNorm(), 0.0);
    return out;
}

namespace {

double sorted_quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double silverman_bandwidth(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) throw Error(ErrorCode::TooFewValues, "bandwidth needs at least 2 values");
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = (sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25)) / 1.34;

    double spread = std::min(sd, iqr);
    if (!(spread > 0.0)) spread = std::max(sd, iqr);
    if (!(spread > 0.0)) spread = 1e-6 * std::max(1.0, std::abs(mean));
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

double kde_threshold(std::span<const double> values, double quantile) {
    if (values.size() < 50) throw Error(ErrorCode::TooFewValues, "KDE threshold needs at least 50 values");
    if (!(quantile > 0.9 && quantile < 0.9999)) {
        throw Error(ErrorCode::InvalidArgument, "KDE quantile must lie in (0.9, 0.9999)");
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteData, "KDE input contains non-finite values");
    }
    const double h = silverman_bandwidth(values);
    const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    auto cdf = [&](double x) {
        double acc = 0.0;
        for (double v : values) acc += 0.5 * std::erfc(-(x - v) / (h * std::sqrt(2.0)));
        return acc / n;
    };

    double lo = *min_it;
    double hi = *max_it + 10.0 * h;
    if (cdf(lo) >= quantile) return lo;
    while (hi - lo > 1e-10 * std::max(1.0, std::abs(hi))) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < quantile) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return hi;
}

Thresholds kde_thresholds(std::span<const StatRecord> records, double quantile) {
    std::vector<double> t2f, t2e, t2, spe;
    t2f.reserve(records.size());
    t2e.reserve(records.size());
    t2.reserve(records.size());
    spe.reserve(records.size());
    for (const StatRecord& r : records) {
        t2f.push_back(r.t2f);
        t2e.push_back(r.t2e);
        t2.push_back(r.t2);
        spe.push_back(r.spe);
    }
    Thresholds thr;
    thr.quantile = quantile;
    thr.t2f = kde_threshold(t2f, quantile);
    thr.t2e = kde_threshold(t2e, quantile);
    thr.t2 = kde_threshold(t2, quantile);
    thr.spe = kde_threshold(spe, quantile);
    return thr;
}

Exceedance exceedance(const StatRecord& rec, const Thresholds& thr) noexcept {
    return {rec.t2f > thr.t2f, rec.t2e > thr.t2e, rec.t2 > thr.t2, rec.spe > thr.spe};
}

namespace {

MonitorStatus rule_status(const Exceedance& ex, const ClassifierCounters& c, const ClassifierConfig& config) {
    const bool inner = ex.t2e || ex.t2 || ex.spe;
    if (!ex.any()) return MonitorStatus::Normal;
    if (ex.all()) return c.fault_run >= config.persist_n ? MonitorStatus::Fault : MonitorStatus::Normal;
    if (!ex.t2f) return c.abnormal_run >= config.persist_n ? MonitorStatus::PotentialFault : MonitorStatus::Normal;
    if (!inner) return c.newmode_run >= config.confirm_n ? MonitorStatus::NewMode : MonitorStatus::Normal;
    // Equilibrium broken together with part of the other statistics: wait as
    // long as a mode switch would need to settle before calling it abnormal.
    return c.abnormal_run >= config.confirm_n ? MonitorStatus::PotentialFault : MonitorStatus::Normal;
}

}  // namespace

MonitorStatus classify(const StatRecord& rec, const Thresholds& thr, ClassifierCounters& c,
                       const ClassifierConfig& config) {
    const Exceedance ex = exceedance(rec, thr);
    const bool inner = ex.t2e || ex.t2 || ex.spe;
    c.abnormal_run = inner ? c.abnormal_run + 1 : 0;
    c.fault_run = ex.all() ? c.fault_run + 1 : 0;
    c.newmode_run = ex.t2f ? c.newmode_run + 1 : 0;
    c.clear_run = ex.any() ? 0 : c.clear_run + 1;

    const MonitorStatus status = rule_status(ex, c, config);
    if (is_alarm(status)) {
        c.latched = status;
        return status;
    }
    if (is_alarm(c.latched)) {
        if (status == MonitorStatus::NewMode || c.clear_run >= config.persist_n) {
            c.latched = MonitorStatus::Normal;
            return status;
        }
        return c.latched;
    }
    return status;
}

namespace {

SegmentMetrics evaluate_range(const std::vector<bool>& alarms, const std::vector<bool>& faulty, std::size_t begin,
                              std::size_t end) {
    std::size_t n_fault = 0, hit = 0, n_normal = 0, false_alarm = 0;
    std::optional<std::size_t> onset;
    for (std::size_t i = begin; i < end; ++i) {
        if (faulty[i]) {
            ++n_fault;
            hit += alarms[i] ? 1 : 0;
            if (!onset) onset = i;
        } else {
            ++n_normal;
            false_alarm += alarms[i] ? 1 : 0;
        }
    }
    SegmentMetrics out;
    if (n_fault > 0) out.fdr = static_cast<double>(hit) / static_cast<double>(n_fault);
    if (n_normal > 0) out.far = static_cast<double>(false_alarm) / static_cast<double>(n_normal);
    if (onset) {
        out.onset = *onset;
        for (std::size_t i = *onset; i < end; ++i) {
            if (alarms[i]) {
                out.dd = i - *onset;
                break;
            }
        }
    }
    return out;
}

void check_lengths(const std::vector<bool>& alarms, const std::vector<bool>& faulty) {
    if (alarms.size() != faulty.size()) {
        throw Error(ErrorCode::LengthMismatch, "alarm and label sequences differ in length");
    }
}

}  // namespace

SegmentMetrics evaluate(const std::vector<bool>& alarms, const std::vector<bool>& faulty) {
    check_lengths(alarms, faulty);
    return evaluate_range(alarms, faulty, 0, alarms.size());
}

std::vector<SegmentMetrics> evaluate_segments(const std::vector<bool>& alarms, const std::vector<bool>& faulty) {
    check_lengths(alarms, faulty);
    std::vector<SegmentMetrics> out;
    std::size_t normal_begin = 0;
    std::size_t i = 0;
    while (i < faulty.size()) {
        if (!faulty[i]) {
            ++i;
            continue;
        }
        std::size_t end = i;
        while (end < faulty.size() && faulty[end]) ++end;
        // The normal stretch since the previous segment plus the segment itself.
        out.push_back(evaluate_range(alarms, faulty, normal_begin, end));
        normal_begin = end;
        i = end;
    }
    return out;
}

}  // namespace rcamon
