#include "rcamon/simgen.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>

#include "rcamon/error.hpp"

namespace rcamon {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

std::size_t ScenarioConfig::total_samples() const noexcept {
    std::size_t n = 0;
    for (const ModeSpec& m : modes) n += m.duration;
    return n;
}

VariableGrouping ScenarioConfig::grouping() const {
    VariableGrouping g;
    for (Index j = 0; j < m1; ++j) g.block1.push_back(j);
    for (Index j = 0; j < m2; ++j) g.block2.push_back(m1 + j);
    for (Index j = 0; j < m3; ++j) g.block3.push_back(m1 + m2 + j);
    return g;
}

void ScenarioConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
    if (m1 < 2 || m2 < 0 || m3 < 0) fail("block sizes must satisfy m1 >= 2, m2 >= 0, m3 >= 0");
    if (n_trends < 1 || n_trends >= m1) fail("n_trends must lie in [1, m1)");
    if (modes.empty()) fail("at least one mode is required");
    for (const ModeSpec& m : modes) {
        if (m.duration == 0) fail("mode durations must be positive");
        if (m.loading.size() != 0 && (m.loading.rows() != m1 || m.loading.cols() != n_trends)) {
            fail("mode loading must be m1 x n_trends");
        }
        if (m.setpoints.size() != 0 && m.setpoints.size() != m2) fail("mode setpoints must have m2 entries");
    }
    const std::size_t n = total_samples();
    for (const FaultSpec& f : faults) {
        if (f.onset >= n) fail("fault onset beyond the end of the scenario");
        if (f.variable < 0 || f.variable >= variables()) fail("fault variable out of range");
        if (!std::isfinite(f.magnitude)) fail("fault magnitude must be finite");
    }
    if (!(noise_std >= 0.0) || !(trend_std >= 0.0)) fail("noise levels must be nonnegative");
    if (!(ar_coef > -1.0 && ar_coef < 1.0)) fail("ar_coef must lie in (-1, 1)");
    if (!(setpoint_spread >= 0.0)) fail("setpoint_spread must be nonnegative");
}

namespace {

MatrixXd draw_matrix(std::mt19937_64& rng, Index rows, Index cols) {
    std::normal_distribution<double> nd(0.0, 1.0);
    MatrixXd out(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) out(i, j) = nd(rng);
    }
    return out;
}

RowVectorXd draw_row(std::mt19937_64& rng, Index n, double std) {
    std::normal_distribution<double> nd(0.0, 1.0);
    RowVectorXd out(n);
    for (Index j = 0; j < n; ++j) out(j) = std * nd(rng);
    return out;
}

}  // namespace

Scenario generate(const ScenarioConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);

    // Structural draws first so that they do not depend on the durations.
    Scenario out;
    for (const ModeSpec& m : cfg.modes) {
        out.loadings.push_back(m.loading.size() != 0 ? m.loading : draw_matrix(rng, cfg.m1, cfg.n_trends));
    }
    std::vector<VectorXd> setpoints;
    for (const ModeSpec& m : cfg.modes) {
        if (m.setpoints.size() != 0) {
            setpoints.push_back(m.setpoints);
            continue;
        }
        VectorXd s(cfg.m2);
        for (Index j = 0; j < cfg.m2; ++j) s(j) = cfg.setpoint_spread * unif(rng);
        setpoints.push_back(s);
    }
    const Index latent = std::max<Index>(1, cfg.m3 / 2);
    const MatrixXd mixing = draw_matrix(rng, latent, cfg.m3);
    RowVectorXd level3(cfg.m3);
    for (Index j = 0; j < cfg.m3; ++j) level3(j) = 5.0 * unif(rng);
    RowVectorXd level1(cfg.m1);
    for (Index j = 0; j < cfg.m1; ++j) level1(j) = 5.0 * unif(rng);

    const std::size_t n = cfg.total_samples();
    const Index m = cfg.variables();
    out.data.values.resize(static_cast<Index>(n), m);
    out.labels.resize(n);
    for (Index j = 0; j < m; ++j) {
        const char* prefix = j < cfg.m1 ? "c" : (j < cfg.m1 + cfg.m2 ? "s" : "o");
        const Index local = j < cfg.m1 ? j : (j < cfg.m1 + cfg.m2 ? j - cfg.m1 : j - cfg.m1 - cfg.m2);
        out.data.variable_names.push_back(prefix + std::to_string(local));
    }

    VectorXd trend = VectorXd::Zero(cfg.n_trends);
    RowVectorXd noise1 = RowVectorXd::Zero(cfg.m1);
    RowVectorXd latent_state = RowVectorXd::Zero(latent);
    RowVectorXd noise3 = RowVectorXd::Zero(cfg.m3);
    RowVectorXd offset1 = level1;

    std::size_t t = 0;
    for (std::size_t k = 0; k < cfg.modes.size(); ++k) {
        if (k > 0) {
            // Keep the noise-free level continuous at the switch.
            offset1 += (trend.transpose() * (out.loadings[k - 1] - out.loadings[k]).transpose());
            out.switch_index.push_back(t);
        }
        const MatrixXd& load = out.loadings[k];
        for (std::size_t i = 0; i < cfg.modes[k].duration; ++i, ++t) {
            trend += draw_row(rng, cfg.n_trends, cfg.trend_std).transpose();
            noise1 = cfg.ar_coef * noise1 + draw_row(rng, cfg.m1, cfg.noise_std);
            latent_state = cfg.ar_coef * latent_state + draw_row(rng, latent, cfg.noise_std);
            noise3 = cfg.ar_coef * noise3 + draw_row(rng, cfg.m3, 0.3 * cfg.noise_std);
            const RowVectorXd white2 = draw_row(rng, cfg.m2, cfg.noise_std);

            auto row = out.data.values.row(static_cast<Index>(t));
            row.head(cfg.m1) = offset1 + trend.transpose() * load.transpose() + noise1;
            row.segment(cfg.m1, cfg.m2) = setpoints[k].transpose() + white2;
            row.tail(cfg.m3) = level3 + latent_state * mixing + noise3;
            out.labels[t].mode_id = static_cast<int>(k);
        }
    }

    for (const FaultSpec& f : cfg.faults) {
        for (std::size_t i = f.onset; i < n; ++i) {
            const double shift =
                f.kind == FaultKind::Bias ? f.magnitude : f.magnitude * static_cast<double>(i - f.onset + 1);
            out.data.values(static_cast<Index>(i), f.variable) += shift;
            out.labels[i].faulty = true;
        }
    }
    return out;
}

MatrixXd true_cointegration_space(const MatrixXd& loading) {
    const Eigen::FullPivLU<MatrixXd> lu(loading.transpose());
    MatrixXd kernel = lu.kernel();
    return Eigen::HouseholderQR<MatrixXd>(kernel).householderQ() * MatrixXd::Identity(kernel.rows(), kernel.cols());
}

MatrixXd true_cointegration_space(const MatrixXd& loading, const RowVectorXd& std) {
    if (std.size() != loading.rows()) throw Error(ErrorCode::DimensionMismatch, "scale vector does not match loading");
    const MatrixXd raw = true_cointegration_space(loading);
    // x_raw b stationary <=> x_scaled (D b) stationary.
    const MatrixXd scaled = std.transpose().asDiagonal() * raw;
    return Eigen::HouseholderQR<MatrixXd>(scaled).householderQ() * MatrixXd::Identity(raw.rows(), raw.cols());
}

std::vector<bool> faulty_flags(const std::vector<SampleLabel>& labels) {
    std::vector<bool> out;
    out.reserve(labels.size());
    for (const SampleLabel& l : labels) out.push_back(l.faulty);
    return out;
}

void write_labels(std::ostream& out, const std::vector<SampleLabel>& labels) {
    out << "index,mode_id,faulty\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << i << ',' << labels[i].mode_id << ',' << (labels[i].faulty ? 1 : 0) << '\n';
    }
}

void write_labels(const std::string& path, const std::vector<SampleLabel>& labels) {
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::InvalidArgument, "cannot open " + path + " for writing");
    write_labels(f, labels);
    if (!f) throw Error(ErrorCode::InvalidArgument, "failed writing " + path);
}

namespace {

long long parse_int(std::string_view s, std::size_t line) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::MalformedInput, "labels line " + std::to_string(line) + ": bad integer");
    }
    return v;
}

}  // namespace

std::vector<SampleLabel> read_labels(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::MalformedInput, "labels file is empty");
    std::vector<SampleLabel> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        while (true) {
            const auto pos = rest.find(',');
            fields.push_back(rest.substr(0, pos));
            if (pos == std::string_view::npos) break;
            rest.remove_prefix(pos + 1);
        }
        if (fields.size() != 3) {
            throw Error(ErrorCode::MalformedInput, "labels line " + std::to_string(lineno) + ": expected 3 fields");
        }
        const long long index = parse_int(fields[0], lineno);
        if (index != static_cast<long long>(out.size())) {
            throw Error(ErrorCode::MalformedInput, "labels line " + std::to_string(lineno) + ": index out of sequence");
        }
        SampleLabel l;
        l.mode_id = static_cast<int>(parse_int(fields[1], lineno));
        const long long f = parse_int(fields[2], lineno);
        if (f != 0 && f != 1) {
            throw Error(ErrorCode::MalformedInput, "labels line " + std::to_string(lineno) + ": faulty must be 0 or 1");
        }
        l.faulty = f == 1;
        out.push_back(l);
    }
    return out;
}

std::vector<SampleLabel> read_labels(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
    return read_labels(f);
}

}  // namespace rcamon
