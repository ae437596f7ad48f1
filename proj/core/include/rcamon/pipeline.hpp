#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>

#include <Eigen/Dense>

#include "rcamon/ca_batch.hpp"
#include "rcamon/ingest.hpp"
#include "rcamon/monitor.hpp"
#include "rcamon/pca_ewc.hpp"
#include "rcamon/rca_stream.hpp"
#include "rcamon/rpca_stream.hpp"

namespace rcamon {

struct MonitorConfig {
    VariableGrouping grouping;
    std::size_t p = 0;      // lag order; 0 selects it by AIC up to p_max
    std::size_t p_max = 4;
    std::optional<std::size_t> r;  // cointegration rank; unset uses the trace test
    double cpv = 0.85;
    double quantile = 0.99;
    double zeta = 100.0;
    OmegaStrategy omega_strategy = OmegaStrategy::Covariance;
    std::size_t n0 = 300;         // samples collected before retraining in a new mode
    std::size_t min_train = 300;  // smallest accepted initial training set
    std::size_t persist_n = 5;
    std::size_t confirm_n = 20;
    std::size_t reorth_period = 50;
    std::size_t threshold_window = 1000;
    std::size_t threshold_refresh = 200;
    double drift_tol = 1e-8;
    std::size_t k_refresh_period = 500;
    bool exact_fallback = true;
    FopLambdaMode lambda_mode = FopLambdaMode::Squared;
    std::size_t rpca_memory = 0;  // 0 keeps the cumulative PCA weights
    double ewc_eps = 1e-8;
    std::size_t ewc_max_iter = 500;

    void validate(Eigen::Index variables) const;
    [[nodiscard]] RcaOptions rca_options() const;
    [[nodiscard]] RpcaOptions rpca_options() const;
    [[nodiscard]] ClassifierConfig classifier() const;
};

struct PipelineState {
    MonitorConfig config;
    Eigen::Index variables = 0;
    Scaler scaler1;  // reference scalers of the current mode, one per block
    Scaler scaler2;
    Scaler scaler3;
    RcaState rca;
    Eigen::MatrixXd bf_perp;  // complement projector of the current cointegration matrix
    RpcaState rpca;
    Thresholds thresholds;
    std::optional<EwcPenalty> ewc;  // penalty prepared at the last detected mode switch
    ClassifierCounters counters;
    int mode_id = 0;
    std::deque<StatRecord> history;  // most recent accepted statistics
    std::size_t accepted_since_refresh = 0;
    Eigen::MatrixXd new_mode_buffer;  // raw samples of the mode being collected
    std::size_t buffered = 0;
    bool collecting = false;
    std::int64_t next_index = 0;
    std::size_t trace_rank = 0;  // rank reported by the trace test at the last training
};

/// Trains every component on raw data (one sample per row). With a penalty,
/// the PCA stage is retrained with elastic weight consolidation.
PipelineState offline_train(const DataMatrix& x, const MonitorConfig& config,
                            const std::optional<EwcPenalty>& ewc = {});

/// Block-wise scaled pieces of one raw sample.
struct ScaledSample {
    Eigen::RowVectorXd x1;
    Eigen::RowVectorXd x2;
    Eigen::RowVectorXd x3;
};

ScaledSample split_and_scale(const PipelineState& state, const Eigen::RowVectorXd& x);

/// Raw input of the PCA stage: [x1 Bf_perp, x3].
Eigen::RowVectorXd pca_input(const PipelineState& state, const ScaledSample& s);

/// The four monitoring statistics of a raw sample under the current model.
StatRecord compute_statistics(const PipelineState& state, const Eigen::RowVectorXd& x);

struct StepResult {
    StatRecord record;
    Thresholds thresholds;  // limits the record was judged against
    MonitorStatus status = MonitorStatus::Normal;
    int mode_id = 0;
    bool accepted = false;   // the model absorbed the sample
    bool retrained = false;  // a new mode was trained after this sample
};

StepResult online_step(PipelineState& state, const Eigen::RowVectorXd& x);

}  // namespace rcamon
