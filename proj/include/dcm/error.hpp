#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dcm {

enum class ErrorKind {
    ParseError,
    InvalidConfig,
    UnknownRole,
    UnknownVariable,
    MissingVariable,
    GroupReferencesUnknownVariable,
    ConstraintViolation,
    NonFiniteValue,
    DuplicateCell,
    PeriodOutOfRange,
    StaticNotInvariant,
    TargetIsRegressor,
    EmptyDesign,
    SingularSystem,
    InsufficientRows,
    ConfigMismatch,
    OrderViolation,
    ShockOnOutcome,
    InvalidShock,
    InvalidPlayers,
    TooManyPlayers,
    UnknownGroup,
    ZeroDenominator,
    UnstableSpec,
    InvalidArgument,
    ReplicateFailed,
    IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every module reports failures through this exception; `kind()` is the
/// machine-readable tag that the CLI forwards in its error JSON.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace dcm
