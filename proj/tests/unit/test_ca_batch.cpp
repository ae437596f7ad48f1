#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "rcamon/ca_batch.hpp"
#include "rcamon/error.hpp"
#include "rcamon/linalg.hpp"
#include "test_util.hpp"

namespace rcamon {
namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;
using testing::gaussian;
using testing::random_spd;
using testing::random_walks;
using testing::throws_code;

TEST(LagMatrices, IndexBookkeeping) {
    MatrixXd x(5, 2);
    x << 1, 10,
         2, 30,
         4, 20,
         8, 50,
         16, 40;
    const LagMatrices lags = build_lag_matrices(x, 2);
    ASSERT_EQ(lags.levels.rows(), 3);
    ASSERT_EQ(lags.lagged_diffs.cols(), 4);
    for (Eigen::Index t = 0; t < 3; ++t) {
        EXPECT_EQ(lags.levels.row(t), x.row(t + 1));
        EXPECT_EQ(lags.diffs.row(t), x.row(t + 2) - x.row(t + 1));
    }
    // Oldest difference first; the pre-sample difference is zero.
    EXPECT_EQ(lags.lagged_diffs.row(0), (RowVectorXd(4) << 0, 0, 1, 20).finished());
    EXPECT_EQ(lags.lagged_diffs.row(1), (RowVectorXd(4) << 1, 20, 2, -10).finished());
    EXPECT_EQ(lags.lagged_diffs.row(2), (RowVectorXd(4) << 2, -10, 4, 30).finished());
}

TEST(LagMatrices, ConstantInputHasZeroDifferences) {
    const MatrixXd x = MatrixXd::Constant(8, 3, 2.5);
    const LagMatrices lags = build_lag_matrices(x, 2);
    EXPECT_EQ(lags.diffs.norm(), 0.0);
    EXPECT_EQ(lags.lagged_diffs.norm(), 0.0);
}

TEST(LagMatrices, ReconstructsSource) {
    const MatrixXd x = gaussian(10, 3, 4);
    const LagMatrices lags = build_lag_matrices(x, 1);
    EXPECT_EQ(lags.levels.rows(), 9);
    for (Eigen::Index t = 0; t < lags.levels.rows(); ++t) {
        EXPECT_LT((lags.levels.row(t) + lags.diffs.row(t) - x.row(t + 1)).norm(), 1e-15);
    }
    EXPECT_EQ(lags.levels.row(0), x.row(0));
}

TEST(LagMatrices, TooFewSamples) {
    EXPECT_TRUE(throws_code([] { build_lag_matrices(MatrixXd(gaussian(3, 2, 1)), 2); }, ErrorCode::TooFewSamples));
}

LagMatrices planted_lags(Eigen::Index rows, Eigen::Index dim, Eigen::Index m, std::uint64_t seed) {
    LagMatrices lags;
    lags.lagged_diffs = gaussian(rows, dim, seed);
    lags.diffs = gaussian(rows, m, seed + 1);
    lags.levels = gaussian(rows, m, seed + 2);
    return lags;
}

TEST(Ols, OrthonormalRegressors) {
    LagMatrices lags = planted_lags(20, 4, 2, 3);
    lags.lagged_diffs = testing::random_orthonormal(20, 4, 8);
    const OlsFit fit = ols_fit(lags);
    EXPECT_LT((fit.theta - lags.lagged_diffs.transpose() * lags.diffs).norm(), 1e-12);
    EXPECT_FALSE(fit.regularized);
}

TEST(Ols, RecoversPlantedCoefficients) {
    LagMatrices lags = planted_lags(50, 6, 3, 5);
    const MatrixXd theta = gaussian(6, 3, 99);
    lags.diffs = lags.lagged_diffs * theta;
    const OlsFit fit = ols_fit(lags);
    EXPECT_LT((fit.theta - theta).cwiseAbs().maxCoeff(), 1e-10);
    const PredictionErrors e = prediction_errors(lags, fit.theta, fit.phi);
    EXPECT_LT(e.e0.norm(), 1e-10);
}

TEST(Ols, ZeroResponse) {
    LagMatrices lags = planted_lags(30, 4, 2, 7);
    lags.diffs.setZero();
    EXPECT_EQ(ols_fit(lags).theta.norm(), 0.0);
}

TEST(Ols, SingularRegressorsAreRegularized) {
    LagMatrices lags = planted_lags(30, 3, 2, 9);
    lags.lagged_diffs.col(2) = lags.lagged_diffs.col(0);
    EXPECT_TRUE(ols_fit(lags).regularized);
    lags.lagged_diffs.setZero();
    EXPECT_TRUE(throws_code([&] { ols_fit(lags); }, ErrorCode::RankDeficient));
}

TEST(PredictionErrors, ZeroCoefficientsPassThrough) {
    const LagMatrices lags = planted_lags(15, 4, 2, 11);
    const PredictionErrors e = prediction_errors(lags, MatrixXd::Zero(4, 2), MatrixXd::Zero(4, 2));
    EXPECT_EQ(e.e0, lags.diffs);
    EXPECT_EQ(e.e1, lags.levels);
}

TEST(PredictionErrors, OrthogonalToRegressors) {
    const LagMatrices lags = build_lag_matrices(random_walks(200, 3, 13), 2);
    const OlsFit fit = ols_fit(lags);
    const PredictionErrors e = prediction_errors(lags, fit.theta, fit.phi);
    EXPECT_LT((e.e0.transpose() * lags.lagged_diffs).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((e.e1.transpose() * lags.lagged_diffs).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(AssembleAb, IdentityErrors) {
    MatrixXd e = MatrixXd::Zero(6, 3);
    e.topRows(3).setIdentity();
    const Pencil pc = assemble_ab(e, e);
    const MatrixXd third = MatrixXd::Identity(3, 3) / 6.0;
    EXPECT_LT((pc.a.topRightCorner(3, 3) - third).norm(), 1e-15);
    EXPECT_LT((pc.b.topLeftCorner(3, 3) - third).norm(), 1e-15);
    EXPECT_LT((pc.b.bottomRightCorner(3, 3) - third).norm(), 1e-15);
    EXPECT_EQ(pc.a.topLeftCorner(3, 3).norm(), 0.0);
}

TEST(AssembleAb, SymmetricAndPsdProperty) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Pencil pc = assemble_ab(gaussian(40, 4, seed), gaussian(40, 4, seed + 100));
        EXPECT_EQ((pc.a - pc.a.transpose()).norm(), 0.0);
        EXPECT_LT((pc.b - pc.b.transpose()).norm(), 1e-12);
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<MatrixXd>(pc.b).eigenvalues().minCoeff(), -1e-10);
    }
}

TEST(AssembleAb, ShapeMismatch) {
    EXPECT_TRUE(throws_code([] { assemble_ab(MatrixXd::Zero(4, 2), MatrixXd::Zero(4, 3)); },
                            ErrorCode::DimensionMismatch));
}

void expect_gevd_residuals(const MatrixXd& a, const MatrixXd& b, const GeneralizedEigen& ge) {
    for (Eigen::Index i = 0; i < ge.values.size(); ++i) {
        const VectorXd w = ge.vectors.col(i);
        const double lambda = ge.values(i);
        const double res = (a * w - lambda * b * w).norm() / w.norm();
        EXPECT_LE(res, 1e-8 * (a.norm() + std::abs(lambda) * b.norm())) << "pair " << i;
        if (i > 0) {
            EXPECT_GE(ge.values(i - 1), lambda);
        }
    }
}

TEST(Gevd, IdentityMetricIsOrdinaryEvd) {
    const MatrixXd s = random_spd(5, 1) - 3.0 * MatrixXd::Identity(5, 5);
    const GeneralizedEigen ge = solve_gevd(s, MatrixXd::Identity(5, 5));
    const auto ref = linalg::eig_descending(s);
    EXPECT_LT((ge.values - ref.values).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Gevd, EqualMatricesGiveUnitEigenvalues) {
    const MatrixXd b = random_spd(4, 2);
    const GeneralizedEigen ge = solve_gevd(b, b);
    EXPECT_LT((ge.values.array() - 1.0).abs().maxCoeff(), 1e-10);
}

TEST(Gevd, RandomPairResidualsAndBOrthonormality) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const MatrixXd g = gaussian(6, 6, seed);
        const MatrixXd a = g + g.transpose();
        const MatrixXd b = random_spd(6, seed + 50);
        const GeneralizedEigen ge = solve_gevd(a, b);
        expect_gevd_residuals(a, b, ge);
        EXPECT_LT((ge.vectors.transpose() * b * ge.vectors - MatrixXd::Identity(6, 6)).norm(), 1e-9);
    }
}

TEST(Gevd, IndefiniteMetricRejected) {
    MatrixXd b = MatrixXd::Identity(3, 3);
    b(1, 1) = -1.0;
    EXPECT_TRUE(throws_code([&] { solve_gevd(MatrixXd::Identity(3, 3), b); }, ErrorCode::IndefiniteB));
}

TEST(TraceTest, NoSignal) {
    const std::vector<double> lam{0.0, 0.0, 0.0};
    EXPECT_EQ(trace_test(lam, 1000), 0u);
}

TEST(TraceTest, TwoStrongRelations) {
    // Statistic for h = 2 is zero, for h = 1 it is 1000 ln 10 > 20.26.
    const std::vector<double> lam{0.9, 0.9, 0.0};
    EXPECT_EQ(trace_test(lam, 1000), 2u);
}

TEST(TraceTest, SaturatedSpectrum) {
    const std::vector<double> lam(4, 1.0 - 1e-12);
    EXPECT_EQ(trace_test(lam, 500), 4u);
}

TEST(TraceTest, MonotoneInEigenvalues) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 0.08);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> lam(4);
        for (double& v : lam) v = u(rng);
        const std::size_t base = trace_test(lam, 300);
        std::vector<double> bumped = lam;
        bumped[static_cast<std::size_t>(trial % 4)] += u(rng);
        EXPECT_GE(trace_test(bumped, 300), base);
    }
}

TEST(TraceTest, CriticalTableRange) {
    EXPECT_NEAR(trace_critical_value(1), 9.1645, 1e-12);
    EXPECT_TRUE(throws_code([] { trace_critical_value(13); }, ErrorCode::InvalidArgument));
    EXPECT_TRUE(throws_code([] { trace_critical_value(0); }, ErrorCode::InvalidArgument));
}

/// dx_t = a b^T x_{t-1} + 0.4 dx_{t-1} - 0.3 dx_{t-2} + e_t with b = (1, -1):
/// two lagged differences, matching lag order 2.
MatrixXd vec2_process(Eigen::Index n, std::uint64_t seed) {
    const MatrixXd e = gaussian(n, 2, seed);
    const VectorXd alpha = (VectorXd(2) << -0.2, 0.2).finished();
    const VectorXd beta = (VectorXd(2) << 1.0, -1.0).finished();
    MatrixXd x = MatrixXd::Zero(n, 2);
    RowVectorXd dx1 = RowVectorXd::Zero(2);
    RowVectorXd dx2 = RowVectorXd::Zero(2);
    for (Eigen::Index t = 1; t < n; ++t) {
        const RowVectorXd dx = (x.row(t - 1) * beta) * alpha.transpose() + 0.4 * dx1 - 0.3 * dx2 + e.row(t);
        x.row(t) = x.row(t - 1) + dx;
        dx2 = dx1;
        dx1 = dx;
    }
    return x;
}

TEST(SelectOrder, RecoversSecondOrderProcess) {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) hits += select_order_aic(vec2_process(2000, 300 + seed), 4) == 2;
    EXPECT_GE(hits, 40);
}

TEST(SelectOrder, WhiteNoisePrefersFirstOrder) {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) hits += select_order_aic(gaussian(1000, 2, 500 + seed), 4) == 1;
    EXPECT_GT(hits, 15);
}

TEST(SelectOrder, SingleCandidateAndShortInput) {
    EXPECT_EQ(select_order_aic(random_walks(50, 2, 1), 1), 1u);
    EXPECT_TRUE(throws_code([] { select_order_aic(MatrixXd(random_walks(20, 2, 1)), 4); }, ErrorCode::TooFewSamples));
}

/// x random walk, y = x + AR(1) noise.
MatrixXd planted_pair(Eigen::Index n, std::uint64_t seed) {
    const MatrixXd e = gaussian(n, 2, seed);
    MatrixXd x(n, 2);
    double walk = 0.0, noise = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
        walk += e(t, 0);
        noise = 0.5 * noise + 0.5 * e(t, 1);
        x(t, 0) = walk;
        x(t, 1) = walk + noise;
    }
    return x;
}

TEST(FitCa, PlantedPairGivesUnitDifferenceVector) {
    const CointegrationModel model = fit_ca(planted_pair(2000, 21), 1);
    ASSERT_EQ(model.r, 1u);
    const MatrixXd truth = (MatrixXd(2, 1) << 1.0, -1.0).finished();
    EXPECT_LT(linalg::max_principal_angle_deg(model.bf(), truth), 5.0);
    EXPECT_EQ(model.w.rows(), 4);
    for (Eigen::Index i = 1; i < model.eigenvalues.size(); ++i) {
        EXPECT_GE(model.eigenvalues(i - 1), model.eigenvalues(i));
    }
}

TEST(FitCa, IndependentWalksHaveNoRelation) {
    int rejected = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        try {
            fit_ca(random_walks(1000, 2, 700 + seed), 1);
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::NoCointegration);
            ++rejected;
        }
    }
    EXPECT_GE(rejected, 45);
}

TEST(FitCa, RankOverride) {
    const CointegrationModel model = fit_ca(random_walks(500, 3, 5), 1, 2);
    EXPECT_EQ(model.r, 2u);
    EXPECT_EQ(model.bf().cols(), 2);
    EXPECT_EQ(model.be().cols(), 2);
    EXPECT_TRUE(throws_code([] { fit_ca(MatrixXd(random_walks(500, 3, 5)), 1, 4); }, ErrorCode::InvalidConfig));
}

TEST(FitCa, WideBlockNeedsARankOverride) {
    const MatrixXd x = random_walks(800, 14, 6);
    EXPECT_TRUE(throws_code([&] { fit_ca(x, 1); }, ErrorCode::InvalidArgument));
    const CaFit fit = fit_ca_detailed(x, 1, 3);
    EXPECT_EQ(fit.model.r, 3u);
    EXPECT_EQ(fit.trace_rank, 0u);
}

TEST(FitCa, DetailedFitMatchesComponents) {
    const MatrixXd x = planted_pair(300, 4);
    const CaFit fit = fit_ca_detailed(x, 2);
    const LagMatrices lags = build_lag_matrices(x, 2);
    const OlsFit ols = ols_fit(lags);
    EXPECT_LT((fit.model.theta - ols.theta).norm(), 1e-12);
    EXPECT_EQ(fit.recent, x.bottomRows(3));
    const Pencil pc = assemble_ab(fit.errors.e0, fit.errors.e1);
    const MatrixXd w = fit.model.w;
    for (Eigen::Index i = 0; i < w.cols(); ++i) {
        const double lambda = fit.model.eigenvalues(i);
        EXPECT_LE((pc.a * w.col(i) - lambda * pc.b * w.col(i)).norm() / w.col(i).norm(),
                  1e-8 * (pc.a.norm() + std::abs(lambda) * pc.b.norm()));
    }
}

TEST(FitCa, EstimateImprovesWithSampleSize) {
    const MatrixXd truth = (MatrixXd(2, 1) << 1.0, -1.0).finished();
    int better = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const MatrixXd x = planted_pair(2000, 900 + seed);
        const double small = linalg::max_principal_angle_deg(fit_ca(x.topRows(500), 1, 1).bf(), truth);
        const double large = linalg::max_principal_angle_deg(fit_ca(x, 1, 1).bf(), truth);
        better += large <= small;
    }
    EXPECT_GE(better, 24);
}

TEST(FitCa, SignConventionOnLevelsBlock) {
    const CointegrationModel model = fit_ca(planted_pair(1000, 8), 1);
    for (Eigen::Index j = 0; j < model.w.cols(); ++j) {
        Eigen::Index arg = 0;
        model.w.col(j).tail(2).cwiseAbs().maxCoeff(&arg);
        EXPECT_GT(model.w(2 + arg, j), 0.0);
    }
}

}  // namespace
}  // namespace rcamon
