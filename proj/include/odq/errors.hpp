#pragma once

#include <stdexcept>
#include <string>

namespace odq {

// Base class for every library failure that is not a plain precondition
// violation (those throw std::invalid_argument).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonRealResult : public Error {
public:
    using Error::Error;
};

class ComplexResidue : public Error {
public:
    using Error::Error;
};

class TruncationNotConverged : public Error {
public:
    using Error::Error;
};

class DimensionBudgetExceeded : public Error {
public:
    using Error::Error;
};

class OutOfTrustRegion : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class DivisionByZero : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace odq
