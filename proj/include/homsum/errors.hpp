#pragma once

#include <stdexcept>

namespace homsum {

// Bad input: wrong shape, malformed syntax, violated precondition.
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// An enumeration or allocation cap would be exceeded.
struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A quantity is mathematically undefined for the given law (e.g. an infinite Orlicz norm).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

}  // namespace homsum
