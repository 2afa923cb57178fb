#pragma once

#include <stdexcept>
#include <string>

namespace sdn {

// Base class for every error thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad argument values: ranges, shapes, labels out of bounds, malformed input.
struct InvalidInput : Error {
    using Error::Error;
};

// A point or measure lies outside the domain an operation is defined on.
struct DomainError : Error {
    using Error::Error;
};

// A user-supplied callable produced a non-finite or otherwise unusable value.
struct EvaluationError : Error {
    using Error::Error;
};

// An instance exceeds a configured size cap.
struct ResourceLimit : Error {
    using Error::Error;
};

// The instance is outside what a restricted solver accepts.
struct UnsupportedInstance : Error {
    using Error::Error;
};

// A layer stack is inconsistent; the message names the offending layer index.
struct ArchitectureError : Error {
    using Error::Error;
};

}  // namespace sdn
