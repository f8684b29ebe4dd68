#include "kite/error.hpp"

namespace kite {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonFiniteInput: return "NonFiniteInput";
        case ErrorCode::InvalidBandwidth: return "InvalidBandwidth";
        case ErrorCode::DegenerateKernel: return "DegenerateKernel";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::DegenerateRA: return "DegenerateRA";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::ClassTooSmall: return "ClassTooSmall";
        case ErrorCode::ConstantSeries: return "ConstantSeries";
        case ErrorCode::TooFewItems: return "TooFewItems";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::TruncatedPayload: return "TruncatedPayload";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::DuplicateModelId: return "DuplicateModelId";
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

bool is_degenerate_input(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonFiniteInput:
        case ErrorCode::DegenerateKernel:
        case ErrorCode::DegenerateRA:
        case ErrorCode::TooFewSamples:
        case ErrorCode::ClassTooSmall:
        case ErrorCode::ConstantSeries:
        case ErrorCode::TooFewItems:
        case ErrorCode::NonFiniteValue:
            return true;
        default:
            return false;
    }
}

Error::Error(ErrorCode code, const std::string &message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

void raise(ErrorCode code, const std::string &message) { throw Error(code, message); }

}  // namespace kite
