#include "rcamon/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <vector>

#include "rcamon/error.hpp"

namespace rcamon {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

[[noreturn]] void bad_value(const std::string& key, std::string_view value) {
    throw Error(ErrorCode::InvalidConfig, "bad value '" + std::string(value) + "' for key " + key);
}

double to_double(const std::string& key, std::string_view v) {
    v = trim(v);
    if (!v.empty() && v.front() == '+') v.remove_prefix(1);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
    return out;
}

std::uint64_t to_unsigned(const std::string& key, std::string_view v) {
    v = trim(v);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
    return out;
}

std::size_t to_size(const std::string& key, std::string_view v) { return static_cast<std::size_t>(to_unsigned(key, v)); }

bool to_bool(const std::string& key, std::string_view v) {
    v = trim(v);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, v);
}

std::vector<std::string_view> split_list(std::string_view v) {
    std::vector<std::string_view> out;
    v = trim(v);
    if (v.empty()) return out;
    while (true) {
        const auto pos = v.find(',');
        out.push_back(trim(v.substr(0, pos)));
        if (pos == std::string_view::npos) break;
        v.remove_prefix(pos + 1);
    }
    return out;
}

std::vector<Eigen::Index> to_indices(const std::string& key, std::string_view v) {
    std::vector<Eigen::Index> out;
    for (std::string_view item : split_list(v)) out.push_back(static_cast<Eigen::Index>(to_unsigned(key, item)));
    return out;
}

std::vector<double> to_doubles(const std::string& key, std::string_view v) {
    std::vector<double> out;
    for (std::string_view item : split_list(v)) out.push_back(to_double(key, item));
    return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ',';
        out += std::to_string(values[i]);
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string join_doubles(const double* data, Eigen::Index n) {
    std::string out;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i > 0) out += ',';
        out += format_double(data[i]);
    }
    return out;
}

using Setter = std::function<void(const std::string&, const std::string&)>;

void apply_keys(const KeyValues& kv, const std::map<std::string, Setter>& setters) {
    for (const auto& [key, value] : kv) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw Error(ErrorCode::InvalidConfig, "unknown key " + key);
        it->second(key, value);
    }
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
    KeyValues out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s(line);
        if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key(trim(s.substr(0, eq)));
        if (key.empty()) throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(lineno) + ": empty key");
        if (!out.emplace(key, std::string(trim(s.substr(eq + 1)))).second) {
            throw Error(ErrorCode::InvalidConfig, "duplicate key " + key);
        }
    }
    return out;
}

KeyValues read_key_values(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::InvalidConfig, "cannot open config file " + path);
    return parse_key_values(f);
}

RunConfig parse_run_config(const KeyValues& kv) {
    RunConfig rc;
    MonitorConfig& m = rc.monitor;
    const std::map<std::string, Setter> setters = {
        {"block1", [&](auto& k, auto& v) { m.grouping.block1 = to_indices(k, v); }},
        {"block2", [&](auto& k, auto& v) { m.grouping.block2 = to_indices(k, v); }},
        {"block3", [&](auto& k, auto& v) { m.grouping.block3 = to_indices(k, v); }},
        {"p", [&](auto& k, auto& v) { m.p = v == "auto" ? 0 : to_size(k, v); }},
        {"p_max", [&](auto& k, auto& v) { m.p_max = to_size(k, v); }},
        {"r",
         [&](auto& k, auto& v) {
             if (v == "auto") {
                 m.r.reset();
             } else {
                 m.r = to_size(k, v);
             }
         }},
        {"cpv", [&](auto& k, auto& v) { m.cpv = to_double(k, v); }},
        {"quantile", [&](auto& k, auto& v) { m.quantile = to_double(k, v); }},
        {"zeta", [&](auto& k, auto& v) { m.zeta = to_double(k, v); }},
        {"omega_strategy",
         [&](auto& k, auto& v) {
             if (v == "covariance") {
                 m.omega_strategy = OmegaStrategy::Covariance;
             } else if (v == "identity") {
                 m.omega_strategy = OmegaStrategy::Identity;
             } else {
                 bad_value(k, v);
             }
         }},
        {"n0", [&](auto& k, auto& v) { m.n0 = to_size(k, v); }},
        {"min_train", [&](auto& k, auto& v) { m.min_train = to_size(k, v); }},
        {"persist_n", [&](auto& k, auto& v) { m.persist_n = to_size(k, v); }},
        {"confirm_n", [&](auto& k, auto& v) { m.confirm_n = to_size(k, v); }},
        {"reorth_period", [&](auto& k, auto& v) { m.reorth_period = to_size(k, v); }},
        {"threshold_window", [&](auto& k, auto& v) { m.threshold_window = to_size(k, v); }},
        {"threshold_refresh", [&](auto& k, auto& v) { m.threshold_refresh = to_size(k, v); }},
        {"drift_tol", [&](auto& k, auto& v) { m.drift_tol = to_double(k, v); }},
        {"k_refresh_period", [&](auto& k, auto& v) { m.k_refresh_period = to_size(k, v); }},
        {"exact_fallback", [&](auto& k, auto& v) { m.exact_fallback = to_bool(k, v); }},
        {"fop_lambda_mode",
         [&](auto& k, auto& v) {
             if (v == "squared") {
                 m.lambda_mode = FopLambdaMode::Squared;
             } else if (v == "literal") {
                 m.lambda_mode = FopLambdaMode::Literal;
             } else {
                 bad_value(k, v);
             }
         }},
        {"rpca_memory", [&](auto& k, auto& v) { m.rpca_memory = to_size(k, v); }},
        {"ewc_eps", [&](auto& k, auto& v) { m.ewc_eps = to_double(k, v); }},
        {"ewc_max_iter", [&](auto& k, auto& v) { m.ewc_max_iter = to_size(k, v); }},
        {"seed", [&](auto& k, auto& v) { rc.seed = to_unsigned(k, v); }},
    };
    apply_keys(kv, setters);
    return rc;
}

RunConfig read_run_config(const std::string& path) { return parse_run_config(read_key_values(path)); }

void write_run_config(std::ostream& out, const RunConfig& rc) {
    const MonitorConfig& m = rc.monitor;
    out << "block1 = " << join(m.grouping.block1) << '\n';
    out << "block2 = " << join(m.grouping.block2) << '\n';
    out << "block3 = " << join(m.grouping.block3) << '\n';
    out << "p = " << (m.p == 0 ? std::string("auto") : std::to_string(m.p)) << '\n';
    out << "p_max = " << m.p_max << '\n';
    out << "r = " << (m.r ? std::to_string(*m.r) : std::string("auto")) << '\n';
    out << "cpv = " << format_double(m.cpv) << '\n';
    out << "quantile = " << format_double(m.quantile) << '\n';
    out << "zeta = " << format_double(m.zeta) << '\n';
    out << "omega_strategy = " << (m.omega_strategy == OmegaStrategy::Covariance ? "covariance" : "identity") << '\n';
    out << "n0 = " << m.n0 << '\n';
    out << "min_train = " << m.min_train << '\n';
    out << "persist_n = " << m.persist_n << '\n';
    out << "confirm_n = " << m.confirm_n << '\n';
    out << "reorth_period = " << m.reorth_period << '\n';
    out << "threshold_window = " << m.threshold_window << '\n';
    out << "threshold_refresh = " << m.threshold_refresh << '\n';
    out << "drift_tol = " << format_double(m.drift_tol) << '\n';
    out << "k_refresh_period = " << m.k_refresh_period << '\n';
    out << "exact_fallback = " << (m.exact_fallback ? "true" : "false") << '\n';
    out << "fop_lambda_mode = " << (m.lambda_mode == FopLambdaMode::Squared ? "squared" : "literal") << '\n';
    out << "rpca_memory = " << m.rpca_memory << '\n';
    out << "ewc_eps = " << format_double(m.ewc_eps) << '\n';
    out << "ewc_max_iter = " << m.ewc_max_iter << '\n';
    out << "seed = " << rc.seed << '\n';
}

namespace {

// Splits "mode.3.loading" into (3, "loading").
bool indexed_key(const std::string& key, std::string_view prefix, std::size_t& index, std::string& field) {
    if (key.rfind(prefix, 0) != 0) return false;
    const std::string_view rest = std::string_view(key).substr(prefix.size());
    const auto dot = rest.find('.');
    if (dot == std::string_view::npos || dot == 0) return false;
    std::size_t idx = 0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + dot, idx);
    if (ec != std::errc() || ptr != rest.data() + dot) return false;
    index = idx;
    field = std::string(rest.substr(dot + 1));
    return true;
}

}  // namespace

ScenarioConfig parse_scenario(const KeyValues& kv) {
    ScenarioConfig sc;
    std::vector<std::size_t> durations;
    KeyValues plain;
    std::map<std::size_t, std::map<std::string, std::string>> mode_keys, fault_keys;
    for (const auto& [key, value] : kv) {
        std::size_t idx = 0;
        std::string field;
        if (indexed_key(key, "mode.", idx, field)) {
            mode_keys[idx][field] = value;
        } else if (indexed_key(key, "fault.", idx, field)) {
            fault_keys[idx][field] = value;
        } else {
            plain.emplace(key, value);
        }
    }
    const std::map<std::string, Setter> setters = {
        {"m1", [&](auto& k, auto& v) { sc.m1 = static_cast<Eigen::Index>(to_size(k, v)); }},
        {"m2", [&](auto& k, auto& v) { sc.m2 = static_cast<Eigen::Index>(to_size(k, v)); }},
        {"m3", [&](auto& k, auto& v) { sc.m3 = static_cast<Eigen::Index>(to_size(k, v)); }},
        {"n_trends", [&](auto& k, auto& v) { sc.n_trends = static_cast<Eigen::Index>(to_size(k, v)); }},
        {"noise_std", [&](auto& k, auto& v) { sc.noise_std = to_double(k, v); }},
        {"trend_std", [&](auto& k, auto& v) { sc.trend_std = to_double(k, v); }},
        {"ar_coef", [&](auto& k, auto& v) { sc.ar_coef = to_double(k, v); }},
        {"setpoint_spread", [&](auto& k, auto& v) { sc.setpoint_spread = to_double(k, v); }},
        {"seed", [&](auto& k, auto& v) { sc.seed = to_unsigned(k, v); }},
        {"durations",
         [&](auto& k, auto& v) {
             for (std::string_view item : split_list(v)) durations.push_back(to_size(k, item));
         }},
    };
    apply_keys(plain, setters);
    if (durations.empty()) throw Error(ErrorCode::InvalidConfig, "durations is required");
    sc.modes.resize(durations.size());
    for (std::size_t i = 0; i < durations.size(); ++i) sc.modes[i].duration = durations[i];

    for (const auto& [idx, fields] : mode_keys) {
        if (idx >= sc.modes.size()) throw Error(ErrorCode::InvalidConfig, "mode." + std::to_string(idx) + " has no duration");
        ModeSpec& mode = sc.modes[idx];
        for (const auto& [field, value] : fields) {
            const std::string key = "mode." + std::to_string(idx) + "." + field;
            const std::vector<double> vals = to_doubles(key, value);
            if (field == "loading") {
                if (static_cast<Eigen::Index>(vals.size()) != sc.m1 * sc.n_trends) {
                    throw Error(ErrorCode::InvalidConfig, key + " needs m1 * n_trends values");
                }
                mode.loading.resize(sc.m1, sc.n_trends);
                for (Eigen::Index i = 0; i < sc.m1; ++i) {
                    for (Eigen::Index j = 0; j < sc.n_trends; ++j) {
                        mode.loading(i, j) = vals[static_cast<std::size_t>(i * sc.n_trends + j)];
                    }
                }
            } else if (field == "setpoints") {
                mode.setpoints = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
            } else {
                throw Error(ErrorCode::InvalidConfig, "unknown key " + key);
            }
        }
    }
    for (const auto& [idx, fields] : fault_keys) {
        FaultSpec f;
        bool has_onset = false, has_variable = false;
        for (const auto& [field, value] : fields) {
            const std::string key = "fault." + std::to_string(idx) + "." + field;
            if (field == "onset") {
                f.onset = to_size(key, value);
                has_onset = true;
            } else if (field == "variable") {
                f.variable = static_cast<Eigen::Index>(to_size(key, value));
                has_variable = true;
            } else if (field == "magnitude") {
                f.magnitude = to_double(key, value);
            } else if (field == "kind") {
                if (value == "bias") {
                    f.kind = FaultKind::Bias;
                } else if (value == "drift") {
                    f.kind = FaultKind::Drift;
                } else {
                    bad_value(key, value);
                }
            } else {
                throw Error(ErrorCode::InvalidConfig, "unknown key " + key);
            }
        }
        if (!has_onset || !has_variable) {
            throw Error(ErrorCode::InvalidConfig, "fault." + std::to_string(idx) + " needs onset and variable");
        }
        sc.faults.push_back(f);
    }
    sc.validate();
    return sc;
}

ScenarioConfig read_scenario(const std::string& path) { return parse_scenario(read_key_values(path)); }

void write_scenario(std::ostream& out, const ScenarioConfig& sc) {
    out << "m1 = " << sc.m1 << '\n';
    out << "m2 = " << sc.m2 << '\n';
    out << "m3 = " << sc.m3 << '\n';
    out << "n_trends = " << sc.n_trends << '\n';
    out << "noise_std = " << format_double(sc.noise_std) << '\n';
    out << "trend_std = " << format_double(sc.trend_std) << '\n';
    out << "ar_coef = " << format_double(sc.ar_coef) << '\n';
    out << "setpoint_spread = " << format_double(sc.setpoint_spread) << '\n';
    out << "seed = " << sc.seed << '\n';
    std::vector<std::size_t> durations;
    for (const ModeSpec& m : sc.modes) durations.push_back(m.duration);
    out << "durations = " << join(durations) << '\n';
    for (std::size_t i = 0; i < sc.modes.size(); ++i) {
        const ModeSpec& m = sc.modes[i];
        if (m.loading.size() != 0) {
            const Eigen::MatrixXd rm = m.loading;
            std::vector<double> vals;
            for (Eigen::Index r = 0; r < rm.rows(); ++r) {
                for (Eigen::Index c = 0; c < rm.cols(); ++c) vals.push_back(rm(r, c));
            }
            out << "mode." << i << ".loading = " << join_doubles(vals.data(), static_cast<Eigen::Index>(vals.size()))
                << '\n';
        }
        if (m.setpoints.size() != 0) {
            out << "mode." << i << ".setpoints = " << join_doubles(m.setpoints.data(), m.setpoints.size()) << '\n';
        }
    }
    for (std::size_t i = 0; i < sc.faults.size(); ++i) {
        const FaultSpec& f = sc.faults[i];
        out << "fault." << i << ".onset = " << f.onset << '\n';
        out << "fault." << i << ".variable = " << f.variable << '\n';
        out << "fault." << i << ".kind = " << (f.kind == FaultKind::Bias ? "bias" : "drift") << '\n';
        out << "fault." << i << ".magnitude = " << format_double(f.magnitude) << '\n';
    }
}

}  // namespace rcamon
