#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semsplat {

/// Error categories. Each maps to a distinct process exit code in the CLI.
enum class ErrorKind {
    BehindCamera = 10,
    ParseError,
    MissingFile,
    EmptyInput,
    DegenerateCovariance,
    ShapeMismatch,
    ImageTooSmall,
    LabelOutOfRange,
    InvalidSampleCount,
    TooFewPoints,
    NonFiniteLoss,
    KTooLarge,
    MissingReferenceLabel,
    EmptyPool,
    ConfigError,
    CorruptCheckpoint,
    DegenerateFeatures,
    IoError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::BehindCamera: return "BehindCamera";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ImageTooSmall: return "ImageTooSmall";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::InvalidSampleCount: return "InvalidSampleCount";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::KTooLarge: return "KTooLarge";
    case ErrorKind::MissingReferenceLabel: return "MissingReferenceLabel";
    case ErrorKind::EmptyPool: return "EmptyPool";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::DegenerateFeatures: return "DegenerateFeatures";
    case ErrorKind::IoError: return "IoError";
    }
    return "Error";
}

} // namespace semsplat
