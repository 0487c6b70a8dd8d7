#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace robustmsd {

enum class ErrorKind {
    InvalidArgument,
    DimensionMismatch,
    NonFinite,
    DegenerateCovariance,
    EtaTooLargeForSample,
    KappaTooSmall,
    NoConvergence,
    BetaOutOfRange,
    UnreachableRadius,
    AllEstimatesRejected,
    TiltOverflow,
    Io,
    Parse,
};

inline std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorKind::EtaTooLargeForSample: return "EtaTooLargeForSample";
    case ErrorKind::KappaTooSmall: return "KappaTooSmall";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::BetaOutOfRange: return "BetaOutOfRange";
    case ErrorKind::UnreachableRadius: return "UnreachableRadius";
    case ErrorKind::AllEstimatesRejected: return "AllEstimatesRejected";
    case ErrorKind::TiltOverflow: return "TiltOverflow";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Parse: return "Parse";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind so the
/// CLI can emit a structured error record.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// Message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

namespace detail {

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) throw Error(kind, what);
}

} // namespace detail

} // namespace robustmsd
