#pragma once

#include <stdexcept>
#include <string>

namespace qep {

// Thrown when matrix shapes do not conform for the requested operation.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a Hessian (or any SPD solve) is singular or loses positive
// definiteness, e.g. rank-deficient activations with no damping.
class SingularHessian : public std::runtime_error {
public:
    explicit SingularHessian(const std::string& what) : std::runtime_error(what) {}
};

// Thrown by the error-bound machinery when a layer has zero spectral norm.
class DegenerateLayer : public std::runtime_error {
public:
    explicit DegenerateLayer(const std::string& what) : std::runtime_error(what) {}
};

// Thrown by the file readers on malformed model/calibration/report input.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when two networks that must share a structure (dims, activations)
// do not. A DimensionError so that shape-contract call sites stay uniform;
// the CLI distinguishes it for its exit-code contract.
class StructureMismatch : public DimensionError {
public:
    explicit StructureMismatch(const std::string& what) : DimensionError(what) {}
};

}  // namespace qep
