#include "dcm/error.hpp"

namespace dcm {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::UnknownRole: return "UnknownRole";
        case ErrorKind::UnknownVariable: return "UnknownVariable";
        case ErrorKind::MissingVariable: return "MissingVariable";
        case ErrorKind::GroupReferencesUnknownVariable: return "GroupReferencesUnknownVariable";
        case ErrorKind::ConstraintViolation: return "ConstraintViolation";
        case ErrorKind::NonFiniteValue: return "NonFiniteValue";
        case ErrorKind::DuplicateCell: return "DuplicateCell";
        case ErrorKind::PeriodOutOfRange: return "PeriodOutOfRange";
        case ErrorKind::StaticNotInvariant: return "StaticNotInvariant";
        case ErrorKind::TargetIsRegressor: return "TargetIsRegressor";
        case ErrorKind::EmptyDesign: return "EmptyDesign";
        case ErrorKind::SingularSystem: return "SingularSystem";
        case ErrorKind::InsufficientRows: return "InsufficientRows";
        case ErrorKind::ConfigMismatch: return "ConfigMismatch";
        case ErrorKind::OrderViolation: return "OrderViolation";
        case ErrorKind::ShockOnOutcome: return "ShockOnOutcome";
        case ErrorKind::InvalidShock: return "InvalidShock";
        case ErrorKind::InvalidPlayers: return "InvalidPlayers";
        case ErrorKind::TooManyPlayers: return "TooManyPlayers";
        case ErrorKind::UnknownGroup: return "UnknownGroup";
        case ErrorKind::ZeroDenominator: return "ZeroDenominator";
        case ErrorKind::UnstableSpec: return "UnstableSpec";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::ReplicateFailed: return "ReplicateFailed";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace dcm
