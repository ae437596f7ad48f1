#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rcamon/ingest.hpp"

namespace rcamon {

struct ModeSpec {
    Eigen::MatrixXd loading;    // m1 x n_trends; empty draws one from the seed
    Eigen::VectorXd setpoints;  // m2; empty draws them from the seed
    std::size_t duration = 0;
};

enum class FaultKind { Bias, Drift };

struct FaultSpec {
    std::size_t onset = 0;    // global sample index
    Eigen::Index variable = 0;  // global column index
    FaultKind kind = FaultKind::Bias;
    double magnitude = 0.0;   // step size, or slope per sample for drift
};

struct ScenarioConfig {
    Eigen::Index m1 = 4;
    Eigen::Index m2 = 2;
    Eigen::Index m3 = 4;
    Eigen::Index n_trends = 1;
    std::vector<ModeSpec> modes;
    std::vector<FaultSpec> faults;
    double noise_std = 0.2;   // innovation std of the stationary noise
    double trend_std = 1.0;   // innovation std of the common trends
    double ar_coef = 0.6;
    double setpoint_spread = 2.0;  // half-width of drawn block-2 setpoints
    std::uint64_t seed = 1;

    [[nodiscard]] std::size_t total_samples() const noexcept;
    [[nodiscard]] Eigen::Index variables() const noexcept { return m1 + m2 + m3; }
    /// Columns [0, m1) form block 1, then m2 columns of block 2, then block 3.
    [[nodiscard]] VariableGrouping grouping() const;
    void validate() const;
};

struct SampleLabel {
    int mode_id = 0;
    bool faulty = false;
};

struct Scenario {
    DataMatrix data;
    std::vector<SampleLabel> labels;
    std::vector<Eigen::MatrixXd> loadings;  // effective loading per mode
    std::vector<std::size_t> switch_index;  // first sample of every mode after the first
};

/// Block 1 follows the mode loading times a random-walk trend plus AR(1)
/// noise and stays continuous across switches; block 2 is the mode setpoint
/// plus white noise; block 3 mixes AR(1) processes around fixed levels.
Scenario generate(const ScenarioConfig& config);

/// Orthonormal basis of the left null space of `loading` (m1 x (m1 - n_trends)).
Eigen::MatrixXd true_cointegration_space(const Eigen::MatrixXd& loading);

/// The same space expressed for data standardised with column stds `std`.
Eigen::MatrixXd true_cointegration_space(const Eigen::MatrixXd& loading, const Eigen::RowVectorXd& std);

std::vector<bool> faulty_flags(const std::vector<SampleLabel>& labels);

void write_labels(std::ostream& out, const std::vector<SampleLabel>& labels);
void write_labels(const std::string& path, const std::vector<SampleLabel>& labels);
std::vector<SampleLabel> read_labels(std::istream& in);
std::vector<SampleLabel> read_labels(const std::string& path);

}  // namespace rcamon
