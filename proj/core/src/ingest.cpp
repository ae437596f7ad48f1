#include "rcamon/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <string_view>

#include "rcamon/error.hpp"

namespace rcamon {

void DataMatrix::validate() const {
    if (values.rows() < 2) throw Error(ErrorCode::TooFewSamples, "data needs at least 2 samples");
    if (values.cols() < 2) throw Error(ErrorCode::DimensionMismatch, "data needs at least 2 variables");
    if (!variable_names.empty() && static_cast<Eigen::Index>(variable_names.size()) != values.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "variable name count does not match column count");
    }
    if (!values.allFinite()) throw Error(ErrorCode::NonFiniteData, "data contains NaN or infinite entries");
    if (!(sample_interval_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample interval must be positive");
}

void VariableGrouping::validate(Eigen::Index variable_count) const {
    if (block1.empty()) throw Error(ErrorCode::InvalidConfig, "block1 must not be empty");
    std::set<Eigen::Index> seen;
    for (const auto* block : {&block1, &block2, &block3}) {
        for (Eigen::Index idx : *block) {
            if (idx < 0 || idx >= variable_count) {
                throw Error(ErrorCode::InvalidConfig,
                            "variable index " + std::to_string(idx) + " out of range");
            }
            if (!seen.insert(idx).second) {
                throw Error(ErrorCode::InvalidConfig,
                            "variable index " + std::to_string(idx) + " assigned to more than one block");
            }
        }
    }
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, std::span<const Eigen::Index> columns) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(columns[j]);
    return out;
}

Eigen::RowVectorXd select_columns(const Eigen::RowVectorXd& x, std::span<const Eigen::Index> columns) {
    Eigen::RowVectorXd out(static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) out(static_cast<Eigen::Index>(j)) = x(columns[j]);
    return out;
}

Scaler fit_scaler(const Eigen::MatrixXd& x) {
    if (x.rows() < 2) throw Error(ErrorCode::TooFewSamples, "scaler needs at least 2 samples");
    if (!x.allFinite()) throw Error(ErrorCode::NonFiniteData, "data contains NaN or infinite entries");
    Scaler s;
    s.mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - s.mean;
    const Eigen::RowVectorXd var = centered.colwise().squaredNorm() / static_cast<double>(x.rows() - 1);
    for (Eigen::Index i = 0; i < var.size(); ++i) {
        if (var(i) < kConstantColumnVariance) {
            throw Error(ErrorCode::ConstantColumn, "column " + std::to_string(i) + " is constant");
        }
    }
    s.std = var.cwiseSqrt();
    return s;
}

Scaler fit_scaler(const DataMatrix& x) { return fit_scaler(x.values); }

namespace {
void check_width(const Scaler& s, Eigen::Index cols) {
    if (cols != s.size()) {
        throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(s.size()) + " columns, got " +
                                                      std::to_string(cols));
    }
}
}  // namespace

Eigen::MatrixXd scale(const Scaler& s, const Eigen::MatrixXd& x) {
    check_width(s, x.cols());
    return (x.rowwise() - s.mean).array().rowwise() / s.std.array();
}

Eigen::RowVectorXd scale(const Scaler& s, const Eigen::RowVectorXd& x) {
    check_width(s, x.cols());
    return (x - s.mean).array() / s.std.array();
}

DataMatrix scale(const Scaler& s, const DataMatrix& x) {
    DataMatrix out = x;
    out.values = scale(s, x.values);
    return out;
}

Eigen::MatrixXd unscale(const Scaler& s, const Eigen::MatrixXd& x) {
    check_width(s, x.cols());
    return (x.array().rowwise() * s.std.array()).matrix().rowwise() + s.mean;
}

Scaler update_scaler(const Scaler& s, const Eigen::RowVectorXd& x, std::size_t k) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "update_scaler needs k >= 1");
    check_width(s, x.cols());
    const double alpha = static_cast<double>(k) / static_cast<double>(k + 1);
    Scaler out;
    out.mean = alpha * s.mean + (1.0 - alpha) * x;
    const Eigen::RowVectorXd var =
        alpha * s.std.array().square() + (1.0 - alpha) * (x - out.mean).array().square();
    out.std = var.cwiseSqrt();
    return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        fields.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return fields;
}

}  // namespace

DataMatrix read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::MalformedInput, "empty CSV input");
    // Tolerate a UTF-8 byte-order mark.
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

    DataMatrix data;
    for (auto name : split_commas(line)) {
        if (name.empty()) throw Error(ErrorCode::MalformedInput, "empty variable name in header");
        data.variable_names.emplace_back(name);
    }
    const std::size_t m = data.variable_names.size();

    std::vector<double> flat;
    std::size_t rows = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_commas(line);
        if (fields.size() != m) {
            throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": expected " +
                                                       std::to_string(m) + " fields, got " +
                                                       std::to_string(fields.size()));
        }
        for (auto f : fields) {
            double v = 0.0;
            const auto* begin = f.data();
            const auto* end = f.data() + f.size();
            if (!f.empty() && *begin == '+') ++begin;
            const auto [ptr, ec] = std::from_chars(begin, end, v);
            if (f.empty() || ec != std::errc{} || ptr != end) {
                throw Error(ErrorCode::MalformedInput,
                            "line " + std::to_string(line_no) + ": cannot parse '" + std::string(f) + "'");
            }
            flat.push_back(v);
        }
        ++rows;
    }

    data.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(m));
    if (!data.values.allFinite()) throw Error(ErrorCode::NonFiniteData, "CSV contains NaN or infinite entries");
    return data;
}

DataMatrix read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open '" + path + "'");
    return read_csv(in);
}

void write_csv(std::ostream& out, const DataMatrix& data) {
    for (Eigen::Index j = 0; j < data.values.cols(); ++j) {
        if (j > 0) out << ',';
        if (static_cast<Eigen::Index>(data.variable_names.size()) == data.values.cols()) {
            out << data.variable_names[static_cast<std::size_t>(j)];
        } else {
            out << "x" << j;
        }
    }
    out << '\n';
    std::array<char, 64> buf{};
    for (Eigen::Index i = 0; i < data.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.values.cols(); ++j) {
            if (j > 0) out << ',';
            const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), data.values(i, j));
            out.write(buf.data(), res.ptr - buf.data());
        }
        out << '\n';
    }
}

void write_csv(const std::string& path, const DataMatrix& data) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
    write_csv(out, data);
}

}  // namespace rcamon
