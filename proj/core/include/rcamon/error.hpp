#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rcamon {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    NonFiniteData,
    ConstantColumn,
    MalformedInput,
    SeriesTooShort,
    TooFewSamples,
    RankDeficient,
    IndefiniteB,
    NoCointegration,
    NumericalBreakdown,
    IndefiniteBlock,
    AllZeroSpectrum,
    NonPSDInput,
    Untrained,
    TooFewValues,
    LengthMismatch,
    InvalidConfig,
    SchemaMismatch,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable error code; every failure in the
/// library surfaces as one of these.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace rcamon
