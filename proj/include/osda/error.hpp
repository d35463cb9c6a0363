#pragma once

#include <stdexcept>
#include <string>

namespace osda {

// Base for all library errors. Subclasses name the violated contract.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateVector : Error {
    explicit DegenerateVector(const std::string& msg) : Error(msg) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

struct InvalidClassCount : Error {
    explicit InvalidClassCount(const std::string& msg) : Error(msg) {}
};

struct InsufficientSamples : Error {
    explicit InsufficientSamples(const std::string& msg) : Error(msg) {}
};

struct InvalidLabel : Error {
    explicit InvalidLabel(const std::string& msg) : Error(msg) {}
};

struct InvalidUncertainty : Error {
    explicit InvalidUncertainty(const std::string& msg) : Error(msg) {}
};

struct NonFiniteGradient : Error {
    explicit NonFiniteGradient(const std::string& msg) : Error(msg) {}
};

struct EmptyBatch : Error {
    explicit EmptyBatch(const std::string& msg) : Error(msg) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct InvalidConfig : Error {
    explicit InvalidConfig(const std::string& msg) : Error(msg) {}
};

}  // namespace osda
