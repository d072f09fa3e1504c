#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cqosc {

enum class ErrorCode {
    InvalidArgument,
    ConfigError,
    GridTooSmall,
    GridMismatch,
    DegenerateBVP,
    SingularBoundarySystem,
    Resonance,
    SingularSystem,
    UnstableStep,
    CutoffTooSmall,
    EtaUnderflow,
    WindowTooSmall,
};

/// Machine-readable name of an error code, as printed by the CLI.
std::string_view error_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    std::string_view name() const noexcept { return error_name(code_); }

private:
    ErrorCode code_;
};

}  // namespace cqosc
