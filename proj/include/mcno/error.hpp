#pragma once

#include <stdexcept>
#include <string>

namespace mcno {

// Base for every error thrown by the library. The CLI maps each subclass to
// its own exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace mcno
