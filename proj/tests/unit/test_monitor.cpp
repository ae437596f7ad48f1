#include <cmath>
#include <algorithm>
#include <array>
#include <optional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "rcamon/error.hpp"
#include "rcamon/linalg.hpp"
#include "rcamon/monitor.hpp"
#include "test_util.hpp"

namespace rcamon {
namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;
using testing::gaussian;
using testing::throws_code;

TEST(ComplementProjector, IdempotentAndAnnihilating) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const MatrixXd b = gaussian(5, 2, seed);
        const MatrixXd perp = complement_projector(b);
        EXPECT_LT((perp * perp - perp).norm(), 1e-10);
        EXPECT_LT((perp * b).norm(), 1e-10);
        EXPECT_NEAR(perp.trace(), 3.0, 1e-10);
    }
}

TEST(ComplementProjector, RankDeficientInput) {
    MatrixXd b = gaussian(4, 2, 1);
    b.col(1) = 2.0 * b.col(0);
    EXPECT_TRUE(throws_code([&] { complement_projector(b); }, ErrorCode::RankDeficient));
}

RpcaState pca_state(std::uint64_t seed) {
    const MatrixXd x = gaussian(200, 5, seed) * testing::random_spd(5, seed + 1);
    RpcaOptions o;
    o.cpv = 0.7;
    return rpca_init(x, o);
}

TEST(PcaScores, ZeroInput) {
    const PcaScores s = pca_scores(RowVectorXd::Zero(5), pca_state(1));
    EXPECT_EQ(s.t2, 0.0);
    EXPECT_EQ(s.spe, 0.0);
}

TEST(PcaScores, AlgebraicIdentities) {
    const RpcaState st = pca_state(2);
    const auto l = static_cast<Eigen::Index>(st.l);
    ASSERT_LT(l, 5);
    for (std::uint64_t seed = 10; seed < 30; ++seed) {
        const RowVectorXd z = gaussian(1, 5, seed);
        const PcaScores s = pca_scores(z, st);
        const VectorXd kappa = st.p.leftCols(l).transpose() * z.transpose();
        EXPECT_NEAR(s.spe, z.squaredNorm() - kappa.squaredNorm(), 1e-10);
        // T2 as the Mahalanobis form against the retained covariance.
        const MatrixXd inv = st.p.leftCols(l) * st.lambda.head(l).cwiseInverse().asDiagonal() *
                             st.p.leftCols(l).transpose();
        EXPECT_NEAR(s.t2, (z * inv * z.transpose())(0, 0), 1e-10);
        EXPECT_GE(s.t2, 0.0);
        EXPECT_GE(s.spe, 0.0);
    }
}

std::vector<double> normal_draws(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> out(n);
    for (double& v : out) v = nd(rng);
    return out;
}

TEST(KdeThreshold, ConstantValues) {
    const std::vector<double> v(100, 4.0);
    const double h = silverman_bandwidth(v);
    const double lim = kde_threshold(v, 0.99);
    EXPECT_GT(h, 0.0);
    EXPECT_LE(std::abs(lim - 4.0), 3.0 * h);
}

TEST(KdeThreshold, GaussianQuantile) {
    EXPECT_NEAR(kde_threshold(normal_draws(100000, 3), 0.99), 2.33, 0.05);
}

TEST(KdeThreshold, MonotoneInQuantileProperty) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::vector<double> v = normal_draws(300, 100 + seed);
        for (double& x : v) x = x * x;  // chi-square like, as the statistics are
        const double lo = kde_threshold(v, 0.95);
        const double hi = kde_threshold(v, 0.99);
        EXPECT_LE(lo, hi);
        EXPECT_GE(lo, *std::min_element(v.begin(), v.end()));
    }
}

TEST(KdeThreshold, CdfAtLimitEqualsQuantile) {
    const std::vector<double> v = normal_draws(500, 7);
    const double h = silverman_bandwidth(v);
    const double lim = kde_threshold(v, 0.97);
    double cdf = 0.0;
    for (double x : v) cdf += 0.5 * std::erfc(-(lim - x) / (h * std::sqrt(2.0)));
    EXPECT_NEAR(cdf / static_cast<double>(v.size()), 0.97, 1e-8);
}

TEST(KdeThreshold, Preconditions) {
    EXPECT_TRUE(throws_code([] { kde_threshold(std::vector<double>(49, 1.0), 0.99); }, ErrorCode::TooFewValues));
    EXPECT_TRUE(throws_code([] { kde_threshold(std::vector<double>(60, 1.0), 0.5); }, ErrorCode::InvalidArgument));
}

TEST(KdeThresholds, OnePerStatistic) {
    std::vector<StatRecord> recs;
    const std::vector<double> v = normal_draws(400, 8);
    for (std::size_t i = 0; i < v.size(); ++i) recs.push_back({v[i], 2.0 * v[i], 3.0 * v[i], 4.0 * v[i], 0});
    const Thresholds thr = kde_thresholds(recs, 0.99);
    EXPECT_NEAR(thr.t2e, 2.0 * thr.t2f, 1e-6);
    EXPECT_NEAR(thr.spe, 4.0 * thr.t2f, 1e-6);
    EXPECT_EQ(thr.quantile, 0.99);
}

Thresholds unit_limits() { return {1.0, 1.0, 1.0, 1.0, 0.99}; }

StatRecord rec(double f, double e, double t, double s) { return {f, e, t, s, 0}; }

TEST(Classify, AllBelowIsNormal) {
    ClassifierCounters c;
    for (int i = 0; i < 50; ++i) EXPECT_EQ(classify(rec(0.5, 0.5, 0.5, 0.5), unit_limits(), c), MonitorStatus::Normal);
}

TEST(Classify, PersistentEquilibriumBreakIsNewMode) {
    ClassifierCounters c;
    const ClassifierConfig cfg{5, 20};
    for (int i = 1; i < 20; ++i) EXPECT_EQ(classify(rec(10, 0.5, 0.5, 0.5), unit_limits(), c, cfg), MonitorStatus::Normal);
    EXPECT_EQ(classify(rec(10, 0.5, 0.5, 0.5), unit_limits(), c, cfg), MonitorStatus::NewMode);
}

TEST(Classify, SingleSpikeIsNoise) {
    ClassifierCounters c;
    EXPECT_EQ(classify(rec(0.5, 0.5, 0.5, 5.0), unit_limits(), c), MonitorStatus::Normal);
    EXPECT_EQ(classify(rec(0.5, 0.5, 0.5, 0.5), unit_limits(), c), MonitorStatus::Normal);
    EXPECT_EQ(c.abnormal_run, 0u);
}

TEST(Classify, PersistentInnerExceedanceIsPotentialFault) {
    ClassifierCounters c;
    for (int i = 1; i < 5; ++i) EXPECT_EQ(classify(rec(0.5, 0.5, 3, 0.5), unit_limits(), c), MonitorStatus::Normal);
    EXPECT_EQ(classify(rec(0.5, 0.5, 3, 0.5), unit_limits(), c), MonitorStatus::PotentialFault);
}

TEST(Classify, AllFourPersistentIsFault) {
    ClassifierCounters c;
    for (int i = 1; i < 5; ++i) classify(rec(2, 2, 2, 2), unit_limits(), c);
    EXPECT_EQ(classify(rec(2, 2, 2, 2), unit_limits(), c), MonitorStatus::Fault);
}

TEST(Classify, AlarmHeldUntilClear) {
    ClassifierCounters c;
    for (int i = 0; i < 5; ++i) classify(rec(0.5, 0.5, 0.5, 3), unit_limits(), c);
    ASSERT_EQ(c.latched, MonitorStatus::PotentialFault);
    for (int i = 1; i < 5; ++i) EXPECT_EQ(classify(rec(0.5, 0.5, 0.5, 0.5), unit_limits(), c), MonitorStatus::PotentialFault);
    EXPECT_EQ(classify(rec(0.5, 0.5, 0.5, 0.5), unit_limits(), c), MonitorStatus::Normal);
}

// Reference classifier working from the whole exceedance history rather than
// incremental counters.
class ReferenceClassifier {
public:
    explicit ReferenceClassifier(ClassifierConfig cfg) : cfg_(cfg) {}

    MonitorStatus push(const Exceedance& ex) {
        history_.push_back(ex);
        const MonitorStatus rule = rule_at(history_.size() - 1);
        rules_.push_back(rule);
        if (is_alarm(rule)) return rule;
        std::optional<std::size_t> last_alarm;
        for (std::size_t i = rules_.size() - 1; i-- > 0;) {
            if (is_alarm(rules_[i])) {
                last_alarm = i;
                break;
            }
        }
        if (!last_alarm) return rule;
        for (std::size_t i = *last_alarm + 1; i < rules_.size(); ++i) {
            if (rules_[i] == MonitorStatus::NewMode || run(i, [](const Exceedance& e) { return !e.any(); }) >= cfg_.persist_n) {
                return rule;
            }
        }
        return rules_[*last_alarm];
    }

private:
    template <class Pred>
    std::size_t run(std::size_t end, Pred pred) const {
        std::size_t n = 0;
        for (std::size_t i = end + 1; i-- > 0 && pred(history_[i]);) ++n;
        return n;
    }

    MonitorStatus rule_at(std::size_t t) const {
        const Exceedance& ex = history_[t];
        const bool inner = ex.t2e || ex.t2 || ex.spe;
        const auto inner_run = run(t, [](const Exceedance& e) { return e.t2e || e.t2 || e.spe; });
        if (!ex.t2f && !inner) return MonitorStatus::Normal;
        if (ex.t2f && ex.t2e && ex.t2 && ex.spe) {
            return run(t, [](const Exceedance& e) { return e.all(); }) >= cfg_.persist_n ? MonitorStatus::Fault
                                                                                          : MonitorStatus::Normal;
        }
        if (!ex.t2f) return inner_run >= cfg_.persist_n ? MonitorStatus::PotentialFault : MonitorStatus::Normal;
        if (!inner) {
            return run(t, [](const Exceedance& e) { return e.t2f; }) >= cfg_.confirm_n ? MonitorStatus::NewMode
                                                                                        : MonitorStatus::Normal;
        }
        return inner_run >= cfg_.confirm_n ? MonitorStatus::PotentialFault : MonitorStatus::Normal;
    }

    ClassifierConfig cfg_;
    std::vector<Exceedance> history_;
    std::vector<MonitorStatus> rules_;
};

TEST(Classify, MatchesReferenceOnRandomSequences) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const ClassifierConfig cfg{1 + rng() % 6, 1 + rng() % 25};
        // Regime switching so that long runs of each pattern occur.
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::array<double, 4> p{};
        ClassifierCounters c;
        ReferenceClassifier ref(cfg);
        for (int t = 0; t < 400; ++t) {
            if (t % 40 == 0) {
                for (double& v : p) v = u(rng) < 0.5 ? 0.05 : 0.95;
            }
            const StatRecord r = rec(u(rng) < p[0] ? 2.0 : 0.5, u(rng) < p[1] ? 2.0 : 0.5, u(rng) < p[2] ? 2.0 : 0.5,
                                     u(rng) < p[3] ? 2.0 : 0.5);
            const MonitorStatus got = classify(r, unit_limits(), c, cfg);
            const MonitorStatus want = ref.push(exceedance(r, unit_limits()));
            ASSERT_EQ(got, want) << "trial " << trial << " step " << t;
        }
    }
}

TEST(StatusNames, RoundTrip) {
    for (auto s : {MonitorStatus::Normal, MonitorStatus::NewMode, MonitorStatus::PotentialFault, MonitorStatus::Fault}) {
        EXPECT_EQ(parse_status(to_string(s)), s);
    }
    EXPECT_FALSE(parse_status("Broken").has_value());
}

TEST(Evaluate, PerfectDetector) {
    const std::vector<bool> labels{false, false, true, true, true, false};
    const SegmentMetrics m = evaluate(labels, labels);
    EXPECT_EQ(m.fdr, 1.0);
    EXPECT_EQ(m.far, 0.0);
    EXPECT_EQ(m.dd, 0u);
}

TEST(Evaluate, AllNormalWithoutAlarms) {
    const std::vector<bool> none(10, false);
    const SegmentMetrics m = evaluate(none, none);
    EXPECT_EQ(m.far, 0.0);
    EXPECT_FALSE(m.fdr.has_value());
    EXPECT_FALSE(m.dd.has_value());
}

TEST(Evaluate, ShiftedAlarms) {
    std::vector<bool> labels(30, false), alarms(30, false);
    for (std::size_t i = 10; i < 30; ++i) labels[i] = true;
    for (std::size_t i = 13; i < 30; ++i) alarms[i] = true;
    const SegmentMetrics m = evaluate(alarms, labels);
    EXPECT_EQ(m.dd, 3u);
    EXPECT_DOUBLE_EQ(*m.fdr, 17.0 / 20.0);
    EXPECT_EQ(m.onset, 10u);
}

TEST(Evaluate, LengthMismatch) {
    EXPECT_TRUE(throws_code([] { evaluate({true}, {true, false}); }, ErrorCode::LengthMismatch));
}

TEST(EvaluateSegments, OneEntryPerFaultRun) {
    const std::vector<bool> labels{false, true, true, false, false, true, false};
    const std::vector<bool> alarms{true, false, true, false, false, true, false};
    const auto segs = evaluate_segments(alarms, labels);
    ASSERT_EQ(segs.size(), 2u);
    EXPECT_DOUBLE_EQ(*segs[0].fdr, 0.5);
    EXPECT_DOUBLE_EQ(*segs[0].far, 1.0);
    EXPECT_EQ(segs[0].dd, 1u);
    EXPECT_DOUBLE_EQ(*segs[1].fdr, 1.0);
    EXPECT_DOUBLE_EQ(*segs[1].far, 0.0);
    EXPECT_EQ(segs[1].onset, 5u);
}

}  // namespace
}  // namespace rcamon
