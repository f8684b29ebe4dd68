#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kite {

enum class ErrorCode {
    // kernel_core
    NonFiniteInput,
    InvalidBandwidth,
    DegenerateKernel,
    ShapeMismatch,
    // estimators
    DegenerateRA,
    TooFewSamples,
    // random_features / preprocess
    DimMismatch,
    ClassTooSmall,
    // evaluation
    ConstantSeries,
    TooFewItems,
    // io_formats
    BadMagic,
    UnsupportedVersion,
    TruncatedPayload,
    NonFiniteValue,
    DuplicateModelId,
    MissingFile,
    SchemaError,
    IoError,
    // configuration (unknown estimator names, bad flags, ...)
    ConfigError,
};

std::string_view to_string(ErrorCode code);

/// True for errors that indicate broken or degenerate input data rather than
/// a malformed request. The CLI maps these to exit code 3.
bool is_degenerate_input(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &message);

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    [[nodiscard]] const std::string &message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

[[noreturn]] void raise(ErrorCode code, const std::string &message);

}  // namespace kite
