#pragma once

#include <stdexcept>
#include <string>

namespace armpc {

// Raised on incompatible matrix/vector shapes.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised when an operation needs a nonempty set and got an empty one.
class EmptySetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when a support function or LP is unbounded.
class UnboundedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Loss of definiteness, non-convergence and similar numerical failures.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Configuration or input-file validation failure. `field()` is a JSON-pointer
// style path to the offending entry.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string field, const std::string& what)
        : std::runtime_error(field + ": " + what)
        , field_(std::move(field))
    {
    }

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

inline void require_dims(bool ok, const std::string& what)
{
    if (!ok) {
        throw DimensionError(what);
    }
}

} // namespace armpc
