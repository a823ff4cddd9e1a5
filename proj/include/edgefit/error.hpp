#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace edgefit {

enum class ErrorKind {
    MissingColumn,
    MalformedRow,
    EmptyDataset,
    UnseenLabel,
    FewerThanTwoSubjects,
    ShapeMismatch,
    NonFiniteInput,
    InvalidConfig,
    CorruptFile,
    VersionMismatch,
    EmptyTrainSet,
    EmptyTestSet,
    EmptyCalibrationSet,
    AllZeroTensor,
    MissingCalibration,
    AccumulatorOverflow,
    FewerThanTwoProfiles,
};

constexpr std::string_view to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::UnseenLabel: return "UnseenLabel";
    case ErrorKind::FewerThanTwoSubjects: return "FewerThanTwoSubjects";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::CorruptFile: return "CorruptFile";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::EmptyTrainSet: return "EmptyTrainSet";
    case ErrorKind::EmptyTestSet: return "EmptyTestSet";
    case ErrorKind::EmptyCalibrationSet: return "EmptyCalibrationSet";
    case ErrorKind::AllZeroTensor: return "AllZeroTensor";
    case ErrorKind::MissingCalibration: return "MissingCalibration";
    case ErrorKind::AccumulatorOverflow: return "AccumulatorOverflow";
    case ErrorKind::FewerThanTwoProfiles: return "FewerThanTwoProfiles";
    }
    return "Unknown";
}

/// Every failure raised by the library. `kind()` identifies the contract that
/// was violated; `what()` is "<Kind>: <detail>".
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// MalformedRow carries the offending row index (0-based, header excluded).
class MalformedRowError : public Error {
public:
    MalformedRowError(std::size_t row, const std::string& detail)
        : Error(ErrorKind::MalformedRow, "row " + std::to_string(row) + ": " + detail), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& detail) {
    throw Error(kind, detail);
}

}  // namespace edgefit
