#include "rcamon/serialize.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rcamon/error.hpp"

namespace rcamon {

using Eigen::Index;
using Eigen::MatrixXd;
using json = nlohmann::json;

namespace {

constexpr const char* kFormatName = "rcamon-pipeline";

json to_json(const MatrixXd& m) {
    json data = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

template <typename Derived>
json vec_json(const Eigen::MatrixBase<Derived>& v) {
    json data = json::array();
    for (Index i = 0; i < v.size(); ++i) data.push_back(v(i));
    return data;
}

MatrixXd matrix_from(const json& j) {
    const auto rows = j.at("rows").get<Index>();
    const auto cols = j.at("cols").get<Index>();
    const json& data = j.at("data");
    if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols)) {
        throw Error(ErrorCode::SchemaMismatch, "matrix payload does not match its shape");
    }
    MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Index i = 0; i < rows; ++i) {
        for (Index jj = 0; jj < cols; ++jj) m(i, jj) = data[k++].get<double>();
    }
    return m;
}

Eigen::VectorXd vector_from(const json& j) {
    Eigen::VectorXd v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
    return v;
}

json scaler_json(const Scaler& s) { return {{"mean", vec_json(s.mean)}, {"std", vec_json(s.std)}}; }

Scaler scaler_from(const json& j) {
    return {vector_from(j.at("mean")).transpose(), vector_from(j.at("std")).transpose()};
}

json config_json(const MonitorConfig& c) {
    json j;
    j["block1"] = c.grouping.block1;
    j["block2"] = c.grouping.block2;
    j["block3"] = c.grouping.block3;
    j["p"] = c.p;
    j["p_max"] = c.p_max;
    j["r"] = c.r ? json(*c.r) : json(nullptr);
    j["cpv"] = c.cpv;
    j["quantile"] = c.quantile;
    j["zeta"] = c.zeta;
    j["omega_strategy"] = c.omega_strategy == OmegaStrategy::Covariance ? "covariance" : "identity";
    j["n0"] = c.n0;
    j["min_train"] = c.min_train;
    j["persist_n"] = c.persist_n;
    j["confirm_n"] = c.confirm_n;
    j["reorth_period"] = c.reorth_period;
    j["threshold_window"] = c.threshold_window;
    j["threshold_refresh"] = c.threshold_refresh;
    j["drift_tol"] = c.drift_tol;
    j["k_refresh_period"] = c.k_refresh_period;
    j["exact_fallback"] = c.exact_fallback;
    j["fop_lambda_mode"] = c.lambda_mode == FopLambdaMode::Squared ? "squared" : "literal";
    j["rpca_memory"] = c.rpca_memory;
    j["ewc_eps"] = c.ewc_eps;
    j["ewc_max_iter"] = c.ewc_max_iter;
    return j;
}

MonitorConfig config_from(const json& j) {
    MonitorConfig c;
    c.grouping.block1 = j.at("block1").get<std::vector<Index>>();
    c.grouping.block2 = j.at("block2").get<std::vector<Index>>();
    c.grouping.block3 = j.at("block3").get<std::vector<Index>>();
    c.p = j.at("p").get<std::size_t>();
    c.p_max = j.at("p_max").get<std::size_t>();
    if (!j.at("r").is_null()) c.r = j.at("r").get<std::size_t>();
    c.cpv = j.at("cpv").get<double>();
    c.quantile = j.at("quantile").get<double>();
    c.zeta = j.at("zeta").get<double>();
    c.omega_strategy = j.at("omega_strategy").get<std::string>() == "identity" ? OmegaStrategy::Identity
                                                                              : OmegaStrategy::Covariance;
    c.n0 = j.at("n0").get<std::size_t>();
    c.min_train = j.at("min_train").get<std::size_t>();
    c.persist_n = j.at("persist_n").get<std::size_t>();
    c.confirm_n = j.at("confirm_n").get<std::size_t>();
    c.reorth_period = j.at("reorth_period").get<std::size_t>();
    c.threshold_window = j.at("threshold_window").get<std::size_t>();
    c.threshold_refresh = j.at("threshold_refresh").get<std::size_t>();
    c.drift_tol = j.at("drift_tol").get<double>();
    c.k_refresh_period = j.at("k_refresh_period").get<std::size_t>();
    c.exact_fallback = j.at("exact_fallback").get<bool>();
    c.lambda_mode =
        j.at("fop_lambda_mode").get<std::string>() == "literal" ? FopLambdaMode::Literal : FopLambdaMode::Squared;
    c.rpca_memory = j.at("rpca_memory").get<std::size_t>();
    c.ewc_eps = j.at("ewc_eps").get<double>();
    c.ewc_max_iter = j.at("ewc_max_iter").get<std::size_t>();
    return c;
}

json rca_json(const RcaState& s) {
    json j;
    j["m"] = s.m;
    j["p"] = s.p;
    j["r_inv"] = to_json(s.r);
    j["jtj"] = to_json(s.jtj);
    j["jte0"] = to_json(s.jte0);
    j["jte1"] = to_json(s.jte1);
    j["a"] = to_json(s.a);
    j["b"] = to_json(s.b);
    j["k1"] = to_json(s.k1);
    j["k2"] = to_json(s.k2);
    j["window"] = to_json(s.window);
    j["e0_last"] = vec_json(s.e0_last);
    j["rows"] = s.rows;
    j["steps_since_refresh"] = s.steps_since_refresh;
    j["w"] = to_json(s.model.w);
    j["eigenvalues"] = vec_json(s.model.eigenvalues);
    j["rank"] = s.model.r;
    j["theta"] = to_json(s.model.theta);
    j["phi"] = to_json(s.model.phi);
    j["drift_tol"] = s.options.drift_tol;
    j["refresh_period"] = s.options.refresh_period;
    j["exact_fallback"] = s.options.exact_fallback;
    j["rank_tol"] = s.options.rank_tol;
    return j;
}

RcaState rca_from(const json& j) {
    RcaState s;
    s.m = j.at("m").get<std::size_t>();
    s.p = j.at("p").get<std::size_t>();
    s.r = matrix_from(j.at("r_inv"));
    s.jtj = matrix_from(j.at("jtj"));
    s.jte0 = matrix_from(j.at("jte0"));
    s.jte1 = matrix_from(j.at("jte1"));
    s.a = matrix_from(j.at("a"));
    s.b = matrix_from(j.at("b"));
    s.k1 = matrix_from(j.at("k1"));
    s.k2 = matrix_from(j.at("k2"));
    s.window = matrix_from(j.at("window"));
    s.e0_last = vector_from(j.at("e0_last")).transpose();
    s.rows = j.at("rows").get<std::size_t>();
    s.steps_since_refresh = j.at("steps_since_refresh").get<std::size_t>();
    s.model.w = matrix_from(j.at("w"));
    s.model.eigenvalues = vector_from(j.at("eigenvalues"));
    s.model.p = s.p;
    s.model.r = j.at("rank").get<std::size_t>();
    s.model.theta = matrix_from(j.at("theta"));
    s.model.phi = matrix_from(j.at("phi"));
    s.options.drift_tol = j.at("drift_tol").get<double>();
    s.options.refresh_period = j.at("refresh_period").get<std::size_t>();
    s.options.exact_fallback = j.at("exact_fallback").get<bool>();
    s.options.rank_tol = j.at("rank_tol").get<double>();
    return s;
}

json rpca_json(const RpcaState& s) {
    json j;
    j["scaler"] = scaler_json(s.scaler);
    j["p"] = to_json(s.p);
    j["lambda"] = vec_json(s.lambda);
    j["l"] = s.l;
    j["k"] = s.k;
    j["steps_since_reorth"] = s.steps_since_reorth;
    j["reorth_pending"] = s.reorth_pending;
    j["cpv"] = s.options.cpv;
    j["reorth_period"] = s.options.reorth_period;
    j["reorth_tol"] = s.options.reorth_tol;
    j["gap_tol"] = s.options.gap_tol;
    j["memory"] = s.options.memory;
    j["lambda_mode"] = s.options.lambda_mode == FopLambdaMode::Squared ? "squared" : "literal";
    return j;
}

RpcaState rpca_from(const json& j) {
    RpcaState s;
    s.scaler = scaler_from(j.at("scaler"));
    s.p = matrix_from(j.at("p"));
    s.lambda = vector_from(j.at("lambda"));
    s.l = j.at("l").get<std::size_t>();
    s.k = j.at("k").get<std::size_t>();
    s.steps_since_reorth = j.at("steps_since_reorth").get<std::size_t>();
    s.reorth_pending = j.at("reorth_pending").get<bool>();
    s.options.cpv = j.at("cpv").get<double>();
    s.options.reorth_period = j.at("reorth_period").get<std::size_t>();
    s.options.reorth_tol = j.at("reorth_tol").get<double>();
    s.options.gap_tol = j.at("gap_tol").get<double>();
    s.options.memory = j.at("memory").get<std::size_t>();
    s.options.lambda_mode =
        j.at("lambda_mode").get<std::string>() == "literal" ? FopLambdaMode::Literal : FopLambdaMode::Squared;
    return s;
}

json thresholds_json(const Thresholds& t) {
    return {{"t2f", t.t2f}, {"t2e", t.t2e}, {"t2", t.t2}, {"spe", t.spe}, {"quantile", t.quantile}};
}

Thresholds thresholds_from(const json& j) {
    return {j.at("t2f").get<double>(), j.at("t2e").get<double>(), j.at("t2").get<double>(), j.at("spe").get<double>(),
            j.at("quantile").get<double>()};
}

json record_json(const StatRecord& r) { return json::array({r.t2f, r.t2e, r.t2, r.spe, r.index}); }

StatRecord record_from(const json& j) {
    if (!j.is_array() || j.size() != 5) throw Error(ErrorCode::SchemaMismatch, "malformed history record");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(), j[4].get<std::int64_t>()};
}

}  // namespace

std::string serialize_pipeline(const PipelineState& s) {
    json j;
    j["format"] = kFormatName;
    j["format_version"] = kModelFormatVersion;
    j["config"] = config_json(s.config);
    j["variables"] = s.variables;
    j["scaler1"] = scaler_json(s.scaler1);
    j["scaler2"] = scaler_json(s.scaler2);
    j["scaler3"] = scaler_json(s.scaler3);
    j["rca"] = rca_json(s.rca);
    j["bf_perp"] = to_json(s.bf_perp);
    j["rpca"] = rpca_json(s.rpca);
    j["thresholds"] = thresholds_json(s.thresholds);
    if (s.ewc) {
        j["ewc"] = {{"omega", to_json(s.ewc->omega)}, {"p_prev", to_json(s.ewc->p_prev)}, {"zeta", s.ewc->zeta}};
    } else {
        j["ewc"] = nullptr;
    }
    j["counters"] = {s.counters.abnormal_run, s.counters.fault_run, s.counters.newmode_run, s.counters.clear_run,
                     std::string(to_string(s.counters.latched))};
    j["mode_id"] = s.mode_id;
    json hist = json::array();
    for (const StatRecord& r : s.history) hist.push_back(record_json(r));
    j["history"] = std::move(hist);
    j["accepted_since_refresh"] = s.accepted_since_refresh;
    j["new_mode_buffer"] = to_json(s.new_mode_buffer);
    j["buffered"] = s.buffered;
    j["collecting"] = s.collecting;
    j["next_index"] = s.next_index;
    j["trace_rank"] = s.trace_rank;
    return j.dump(1) + "\n";
}

PipelineState deserialize_pipeline(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaMismatch, std::string("model file is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || j.value("format", "") != kFormatName) {
        throw Error(ErrorCode::SchemaMismatch, "not a pipeline model file");
    }
    if (j.value("format_version", -1) != kModelFormatVersion) {
        throw Error(ErrorCode::SchemaMismatch, "unsupported model format version");
    }
    try {
        PipelineState s;
        s.config = config_from(j.at("config"));
        s.variables = j.at("variables").get<Index>();
        s.scaler1 = scaler_from(j.at("scaler1"));
        s.scaler2 = scaler_from(j.at("scaler2"));
        s.scaler3 = scaler_from(j.at("scaler3"));
        s.rca = rca_from(j.at("rca"));
        s.bf_perp = matrix_from(j.at("bf_perp"));
        s.rpca = rpca_from(j.at("rpca"));
        s.thresholds = thresholds_from(j.at("thresholds"));
        if (!j.at("ewc").is_null()) {
            const json& e = j.at("ewc");
            s.ewc = EwcPenalty{matrix_from(e.at("omega")), matrix_from(e.at("p_prev")), e.at("zeta").get<double>()};
        }
        const json& c = j.at("counters");
        const auto latched = parse_status(c.at(4).get<std::string>());
        if (!latched) throw Error(ErrorCode::SchemaMismatch, "unknown latched status");
        s.counters = {c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>(), c.at(2).get<std::size_t>(),
                      c.at(3).get<std::size_t>(), *latched};
        s.mode_id = j.at("mode_id").get<int>();
        for (const json& r : j.at("history")) s.history.push_back(record_from(r));
        s.accepted_since_refresh = j.at("accepted_since_refresh").get<std::size_t>();
        s.new_mode_buffer = matrix_from(j.at("new_mode_buffer"));
        s.buffered = j.at("buffered").get<std::size_t>();
        s.collecting = j.at("collecting").get<bool>();
        s.next_index = j.at("next_index").get<std::int64_t>();
        s.trace_rank = j.at("trace_rank").get<std::size_t>();
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaMismatch, std::string("model file is incomplete: ") + e.what());
    }
}

void save_pipeline(const std::string& path, const PipelineState& state) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::InvalidArgument, "cannot open " + path + " for writing");
    f << serialize_pipeline(state);
    if (!f) throw Error(ErrorCode::InvalidArgument, "failed writing " + path);
}

PipelineState load_pipeline(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::InvalidArgument, "cannot open model file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return deserialize_pipeline(ss.str());
}

}  // namespace rcamon
