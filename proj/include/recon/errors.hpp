#pragma once

#include <stdexcept>
#include <string>

namespace recon {

struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// Field violates the Morse assumptions at grid resolution; callers reseed.
struct DegenerateFieldError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TracingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConsistencyError : std::logic_error {
    using std::logic_error::logic_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace recon
