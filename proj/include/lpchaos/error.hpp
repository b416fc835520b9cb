#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lpchaos {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input or configuration; maps to CLI exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IntegrationDiverged : public Error {
 public:
  explicit IntegrationDiverged(std::size_t step)
      : Error("integration diverged: non-finite state at step " + std::to_string(step)),
        step_(step) {}

  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class StationarityNotReached : public Error {
 public:
  using Error::Error;
};

// Wraps a failure with the pipeline stage it came from.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}

  [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace lpchaos
