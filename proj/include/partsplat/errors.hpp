#pragma once

#include <stdexcept>
#include <string>

namespace partsplat {

// Shapes or sizes disagree with each other or with a cached forward pass.
struct StructuralError : std::runtime_error {
    explicit StructuralError(const std::string& msg) : std::runtime_error(msg) {}
};

// A value is outside its documented range.
struct ParameterError : std::invalid_argument {
    explicit ParameterError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed file content.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerically undefined request (zero-length direction, singular timestep, ...).
struct DegenerateError : std::runtime_error {
    explicit DegenerateError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace partsplat
