#pragma once

#include <stdexcept>
#include <string>

namespace abmscope {

// Input rejected before any work was done. `field()` names the offending
// parameter (config key, CLI flag, or argument) so callers can report it.
class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Valid input that is too short or too sparse for the requested estimate.
class InsufficientDataError : public ValidationError {
public:
    InsufficientDataError(std::string field, const std::string& message)
        : ValidationError(std::move(field), message) {}
};

} // namespace abmscope
