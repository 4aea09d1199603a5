#pragma once

#include <stdexcept>
#include <string>

namespace hcs {

/// Base of every error raised by the library. `kind()` is the stable,
/// machine-readable name that the CLI puts into its JSON error payload.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define HCS_DEFINE_ERROR(Name)                                              \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

HCS_DEFINE_ERROR(GeometryError);
HCS_DEFINE_ERROR(OverlapError);
HCS_DEFINE_ERROR(ContainmentError);
HCS_DEFINE_ERROR(CoefficientError);
HCS_DEFINE_ERROR(ResolutionError);
HCS_DEFINE_ERROR(EmptyDomainError);
HCS_DEFINE_ERROR(ConvergenceError);
HCS_DEFINE_ERROR(SingularSystemError);
HCS_DEFINE_ERROR(EmptyActiveSetError);
HCS_DEFINE_ERROR(PoleProximityError);
HCS_DEFINE_ERROR(BudgetError);
HCS_DEFINE_ERROR(ValidationError);

#undef HCS_DEFINE_ERROR

/// Raised by the config reader; carries the 1-based source position.
class ParseError : public Error {
public:
    ParseError(const std::string& message, int line, int column)
        : Error("ParseError", message + " (line " + std::to_string(line) +
                                  ", column " + std::to_string(column) + ")"),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

}  // namespace hcs
