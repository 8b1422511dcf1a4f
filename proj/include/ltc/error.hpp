#pragma once

#include <stdexcept>
#include <string>

namespace ltc {

// Base for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes or dimensions do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A numerically degenerate state: zero-norm embedding, zero median bandwidth,
// antipodal class mean, vanishing accumulator.
class DegenerateError : public Error {
public:
    using Error::Error;
};

// Malformed input data or an argument outside its documented domain.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Bad configuration key or value. The CLI maps this to exit code 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace ltc
