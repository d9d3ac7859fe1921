// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/error.hpp"

namespace fluidrec {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonFinitePosition: return "NonFinitePosition";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::TruncatedBody: return "TruncatedBody";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ObservationMismatch: return "ObservationMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace fluidrec
