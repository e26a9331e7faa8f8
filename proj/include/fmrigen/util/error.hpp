#pragma once

#include <stdexcept>
#include <string>

namespace fmrigen {

// Bad user input: malformed config, impossible shapes, invalid field values.
// The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public ValidationError {
public:
    explicit ConfigError(const std::string& msg) : ValidationError(msg) {}
};

// On-disk data that does not conform to a file format.
class FormatError : public ValidationError {
public:
    explicit FormatError(const std::string& msg) : ValidationError(msg) {}
};

// Environment failures (I/O and friends). Exit code 1.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// A training run produced a non-finite loss or parameter.
class TrainingDiverged : public std::runtime_error {
public:
    explicit TrainingDiverged(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace fmrigen
