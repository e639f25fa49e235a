#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gqakit {

/// Base class for every error this library raises.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape or extent mismatch between operands.
class DimensionError : public Error {
  public:
    explicit DimensionError(const std::string& msg) : Error("dimension: " + msg) {}
};

/// Invalid argument value (bad group count, out-of-range token, ...).
class ArgumentError : public Error {
  public:
    explicit ArgumentError(const std::string& msg) : Error("argument: " + msg) {}
};

/// Non-finite value produced by a numeric kernel.
class NumericError : public Error {
  public:
    explicit NumericError(const std::string& msg) : Error("numeric: " + msg) {}
};

/// Checkpoint file problems, one kind per failure class.
class IoError : public Error {
  public:
    enum class Kind { BadMagic, BadVersion, Truncated, BadHeader, BadChecksum, FileAccess };

    IoError(Kind kind, const std::string& msg) : Error("io: " + msg), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

/// Training aborted (non-finite loss); carries the loss trajectory up to the failure.
class TrainingError : public Error {
  public:
    TrainingError(const std::string& msg, std::size_t step, std::vector<double> trajectory)
        : Error("training: " + msg + " at step " + std::to_string(step)),
          step_(step),
          trajectory_(std::move(trajectory)) {}

    std::size_t step() const { return step_; }
    const std::vector<double>& trajectory() const { return trajectory_; }

  private:
    std::size_t step_;
    std::vector<double> trajectory_;
};

} // namespace gqakit
