#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fishpose {

// Base class for every error the library throws. The CLI maps subclasses
// onto exit codes: input/parameter problems -> 2, degenerate geometry -> 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or unusable caller input (empty mask, bad parameter value, ...).
class InvalidInputError : public Error {
public:
    using Error::Error;
};

// File could not be parsed; carries the byte offset where parsing stopped.
class ParseError : public InvalidInputError {
public:
    ParseError(const std::string& msg, std::size_t byte_offset)
        : InvalidInputError(msg + " (byte " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Curvature/extent combination that would wrap the template past a half
// cylinder and self-intersect the silhouette.
class OverBendError : public InvalidInputError {
public:
    using InvalidInputError::InvalidInputError;
};

// Calibration matrices that cannot be used (singular K or H, bad R).
class InvalidCalibrationError : public InvalidInputError {
public:
    using InvalidInputError::InvalidInputError;
};

// Synthetic scene specification that cannot be rendered.
class InvalidSpecError : public InvalidInputError {
public:
    using InvalidInputError::InvalidInputError;
};

// Geometry without a unique answer (parallel lines, view ray along the
// fish axis).
class DegenerateGeometryError : public Error {
public:
    using Error::Error;
};

// Reference-plane intersection behind the camera.
class BehindCameraError : public DegenerateGeometryError {
public:
    using DegenerateGeometryError::DegenerateGeometryError;
};

}  // namespace fishpose
