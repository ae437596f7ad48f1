#include "rcamon/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "rcamon/error.hpp"
#include "rcamon/linalg.hpp"

namespace rcamon {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

void MonitorConfig::validate(Index variables) const {
    grouping.validate(variables);
    if (grouping.block1.size() < 2) throw Error(ErrorCode::InvalidConfig, "block1 needs at least 2 variables");
    if (p_max < 1) throw Error(ErrorCode::InvalidConfig, "p_max must be at least 1");
    if (r && (*r < 1 || *r > grouping.block1.size())) throw Error(ErrorCode::InvalidConfig, "r must lie in [1, m1]");
    if (!(cpv > 0.0 && cpv <= 1.0)) throw Error(ErrorCode::InvalidConfig, "cpv must lie in (0, 1]");
    if (!(quantile > 0.9 && quantile < 0.9999)) throw Error(ErrorCode::InvalidConfig, "quantile must lie in (0.9, 0.9999)");
    if (!(zeta >= 0.0)) throw Error(ErrorCode::InvalidConfig, "zeta must be nonnegative");
    if (persist_n < 1 || confirm_n < 1) throw Error(ErrorCode::InvalidConfig, "persist_n and confirm_n must be positive");
    if (threshold_window < 50) throw Error(ErrorCode::InvalidConfig, "threshold_window must be at least 50");
    if (threshold_refresh < 1) throw Error(ErrorCode::InvalidConfig, "threshold_refresh must be positive");
    if (n0 < 60 + std::max(p, p_max)) throw Error(ErrorCode::InvalidConfig, "n0 is too small to retrain a mode");
    if (!(drift_tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "drift_tol must be positive");
    if (!(ewc_eps > 0.0) || ewc_max_iter < 1) throw Error(ErrorCode::InvalidConfig, "invalid EWC solver settings");
}

RcaOptions MonitorConfig::rca_options() const {
    RcaOptions o;
    o.drift_tol = drift_tol;
    o.refresh_period = k_refresh_period;
    o.exact_fallback = exact_fallback;
    return o;
}

RpcaOptions MonitorConfig::rpca_options() const {
    RpcaOptions o;
    o.cpv = cpv;
    o.reorth_period = reorth_period;
    o.lambda_mode = lambda_mode;
    o.memory = rpca_memory;
    return o;
}

ClassifierConfig MonitorConfig::classifier() const { return {persist_n, confirm_n}; }

namespace {

Scaler fit_block_scaler(const MatrixXd& x, const std::vector<Index>& cols) {
    if (cols.empty()) return {};
    return fit_scaler(select_columns(x, cols));
}

RowVectorXd scale_block(const Scaler& s, const RowVectorXd& x, const std::vector<Index>& cols) {
    if (cols.empty()) return {};
    return scale(s, select_columns(x, cols));
}

// First `l` columns: the previous projection, truncated or extended with the
// leading directions of `candidates` orthogonalised against it.
MatrixXd adapt_projection(const MatrixXd& p_prev, const MatrixXd& candidates, Index l) {
    if (p_prev.cols() >= l) return linalg::orthonormalize(p_prev.leftCols(l));
    MatrixXd out(p_prev.rows(), l);
    out.leftCols(p_prev.cols()) = linalg::orthonormalize(p_prev);
    Index filled = p_prev.cols();
    for (Index j = 0; j < candidates.cols() && filled < l; ++j) {
        VectorXd v = candidates.col(j);
        v -= out.leftCols(filled) * (out.leftCols(filled).transpose() * v);
        const double n = v.norm();
        if (n < 1e-8) continue;
        out.col(filled++) = v / n;
    }
    if (filled < l) throw Error(ErrorCode::NumericalBreakdown, "cannot extend the previous projection");
    return out;
}

// PCA of the standardised training input regularised towards the previous
// mode; the result is rotated to diagonalise the sample covariance inside the
// retained subspace and completed with the covariance eigenvectors of the
// complement.
RpcaState ewc_pca(const MatrixXd& raw, const RpcaState& plain, const EwcPenalty& prev, const MonitorConfig& cfg) {
    const MatrixXd z = scale(plain.scaler, raw);
    const Index m = z.cols();
    const auto l = static_cast<Index>(plain.l);
    EwcPenalty penalty;
    penalty.zeta = prev.zeta;
    penalty.omega = prev.omega;
    penalty.p_prev = adapt_projection(prev.p_prev, plain.p, l);

    EwcOptions opt;
    opt.eps = cfg.ewc_eps;
    opt.max_iter = cfg.ewc_max_iter;
    const EwcResult fit = fit_pca_ewc(z, penalty, opt);

    const MatrixXd cov = linalg::symmetrize(z.transpose() * z / static_cast<double>(z.rows() - 1));
    const linalg::SymmetricEigen inner = linalg::eig_descending(linalg::symmetrize(fit.p.transpose() * cov * fit.p));
    MatrixXd full(m, m);
    VectorXd lambda(m);
    full.leftCols(l) = fit.p * inner.vectors;
    lambda.head(l) = inner.values;
    if (l < m) {
        const MatrixXd q = Eigen::HouseholderQR<MatrixXd>(fit.p).householderQ();
        const MatrixXd comp = q.rightCols(m - l);
        const linalg::SymmetricEigen outer = linalg::eig_descending(linalg::symmetrize(comp.transpose() * cov * comp));
        full.rightCols(m - l) = comp * outer.vectors;
        lambda.tail(m - l) = outer.values;
    }
    return rpca_from_eigensystem(plain.scaler, full, lambda, plain.l, plain.k, plain.options);
}

PipelineState train_impl(const DataMatrix& data, const MonitorConfig& cfg, const std::optional<EwcPenalty>& ewc,
                         std::optional<std::size_t> fallback_rank) {
    data.validate();
    cfg.validate(data.variables());
    const MatrixXd& x = data.values;
    const auto& g = cfg.grouping;

    PipelineState st;
    st.config = cfg;
    st.variables = data.variables();
    st.scaler1 = fit_block_scaler(x, g.block1);
    st.scaler2 = fit_block_scaler(x, g.block2);
    st.scaler3 = fit_block_scaler(x, g.block3);
    const MatrixXd x1 = scale(st.scaler1, select_columns(x, g.block1));

    const std::size_t p = cfg.p > 0 ? cfg.p : select_order_aic(x1, cfg.p_max);
    CaFit fit;
    try {
        fit = fit_ca_detailed(x1, p, cfg.r);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoCointegration || !fallback_rank) throw;
        fit = fit_ca_detailed(x1, p, fallback_rank);
    }
    st.trace_rank = fit.trace_rank;
    st.rca = rca_init(fit, cfg.rca_options());
    const MatrixXd bf = fit.model.bf();
    st.bf_perp = complement_projector(bf);

    const Index n = x.rows();
    const Index m1 = x1.cols();
    const auto m3 = static_cast<Index>(g.block3.size());
    MatrixXd pin(n, m1 + m3);
    pin.leftCols(m1) = x1 * st.bf_perp;
    if (m3 > 0) pin.rightCols(m3) = scale(st.scaler3, select_columns(x, g.block3));

    st.rpca = rpca_init(pin, cfg.rpca_options());
    if (ewc && ewc->p_prev.rows() == pin.cols() && ewc->zeta > 0.0) st.rpca = ewc_pca(pin, st.rpca, *ewc, cfg);
    st.ewc = ewc;

    // Training statistics for every sample with a prediction error.
    const MatrixXd x2 = g.block2.empty() ? MatrixXd(n, 0) : scale(st.scaler2, select_columns(x, g.block2));
    const MatrixXd be = fit.model.be();
    const Index first = static_cast<Index>(p);
    std::vector<StatRecord> records;
    records.reserve(static_cast<std::size_t>(n - first));
    for (Index t = first; t < n; ++t) {
        StatRecord rec;
        rec.index = t;
        rec.t2f = (x1.row(t) * bf).squaredNorm() + x2.row(t).squaredNorm();
        rec.t2e = (fit.errors.e0.row(t - first) * be).squaredNorm();
        const PcaScores sc = pca_scores(rpca_scale(st.rpca, pin.row(t)), st.rpca);
        rec.t2 = sc.t2;
        rec.spe = sc.spe;
        records.push_back(rec);
    }
    st.thresholds = kde_thresholds(records, cfg.quantile);
    const std::size_t keep = std::min(records.size(), cfg.threshold_window);
    st.history.assign(records.end() - static_cast<std::ptrdiff_t>(keep), records.end());
    st.next_index = n;
    return st;
}

}  // namespace

PipelineState offline_train(const DataMatrix& x, const MonitorConfig& config, const std::optional<EwcPenalty>& ewc) {
    if (static_cast<std::size_t>(x.samples()) < config.min_train) {
        throw Error(ErrorCode::TooFewSamples, "training needs at least " + std::to_string(config.min_train) +
                                                  " samples, got " + std::to_string(x.samples()));
    }
    return train_impl(x, config, ewc, std::nullopt);
}

ScaledSample split_and_scale(const PipelineState& st, const RowVectorXd& x) {
    if (x.size() != st.variables) throw Error(ErrorCode::DimensionMismatch, "sample has the wrong number of variables");
    if (!x.allFinite()) throw Error(ErrorCode::NonFiniteData, "sample contains non-finite values");
    const auto& g = st.config.grouping;
    return {scale_block(st.scaler1, x, g.block1), scale_block(st.scaler2, x, g.block2),
            scale_block(st.scaler3, x, g.block3)};
}

RowVectorXd pca_input(const PipelineState& st, const ScaledSample& s) {
    RowVectorXd out(s.x1.size() + s.x3.size());
    out.head(s.x1.size()) = s.x1 * st.bf_perp;
    out.tail(s.x3.size()) = s.x3;
    return out;
}

namespace {

StatRecord statistics_of(const PipelineState& st, const ScaledSample& s, const RowVectorXd& pin) {
    if (st.rca.m == 0) throw Error(ErrorCode::Untrained, "pipeline has not been trained");
    StatRecord rec;
    rec.index = st.next_index;
    rec.t2f = (s.x1 * st.rca.model.bf()).squaredNorm() + s.x2.squaredNorm();
    rec.t2e = (rca_prediction_error(st.rca, s.x1) * st.rca.model.be()).squaredNorm();
    const PcaScores sc = pca_scores(rpca_scale(st.rpca, pin), st.rpca);
    rec.t2 = sc.t2;
    rec.spe = sc.spe;
    return rec;
}

void retrain(PipelineState& st) {
    DataMatrix buf;
    buf.values = st.new_mode_buffer.topRows(static_cast<Index>(st.buffered));
    const int mode = st.mode_id + 1;
    const std::int64_t next = st.next_index;
    PipelineState fresh = train_impl(buf, st.config, st.ewc, st.rca.model.r);
    fresh.mode_id = mode;
    fresh.next_index = next;
    st = std::move(fresh);
}

}  // namespace

StatRecord compute_statistics(const PipelineState& st, const RowVectorXd& x) {
    if (st.rca.m == 0) throw Error(ErrorCode::Untrained, "pipeline has not been trained");
    const ScaledSample s = split_and_scale(st, x);
    return statistics_of(st, s, pca_input(st, s));
}

StepResult online_step(PipelineState& st, const RowVectorXd& x) {
    if (st.rca.m == 0) throw Error(ErrorCode::Untrained, "pipeline has not been trained");
    const ScaledSample s = split_and_scale(st, x);
    const RowVectorXd pin = pca_input(st, s);

    StepResult res;
    res.record = statistics_of(st, s, pin);
    res.thresholds = st.thresholds;
    res.mode_id = st.mode_id;
    ++st.next_index;

    if (st.collecting) {
        // The old model keeps scoring while the new mode's data are gathered.
        st.new_mode_buffer.row(static_cast<Index>(st.buffered++)) = x;
        rca_observe(st.rca, s.x1);
        res.status = MonitorStatus::NewMode;
        if (st.buffered == st.config.n0) {
            retrain(st);
            res.retrained = true;
        }
        return res;
    }

    res.status = classify(res.record, st.thresholds, st.counters, st.config.classifier());
    // Sub-persistence exceedances count as noise and are absorbed like any
    // other in-control sample; dropping them would bias the refreshed limits low.
    if (res.status == MonitorStatus::Normal) {
        rca_step(st.rca, s.x1);
        st.bf_perp = complement_projector(st.rca.model.bf());
        rpca_observe(st.rpca, pin);
        st.history.push_back(res.record);
        while (st.history.size() > st.config.threshold_window) st.history.pop_front();
        if (++st.accepted_since_refresh >= st.config.threshold_refresh) {
            const std::vector<StatRecord> window(st.history.begin(), st.history.end());
            st.thresholds = kde_thresholds(window, st.config.quantile);
            st.accepted_since_refresh = 0;
        }
        res.accepted = true;
        return res;
    }

    rca_observe(st.rca, s.x1);
    if (res.status == MonitorStatus::NewMode) {
        // Importance of the outgoing mode is fixed before any new data arrive.
        EwcPenalty pen;
        pen.zeta = st.config.zeta;
        pen.omega = compute_omega(rpca_covariance(st.rpca), st.config.zeta, st.config.omega_strategy);
        pen.p_prev = st.rpca.retained();
        st.ewc = pen;
        st.collecting = true;
        st.new_mode_buffer.resize(static_cast<Index>(st.config.n0), st.variables);
        st.new_mode_buffer.row(0) = x;
        st.buffered = 1;
    }
    return res;
}

}  // namespace rcamon
