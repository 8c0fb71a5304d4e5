#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace rankgan {

// Shape or argument contract violated by a caller.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid or inconsistent configuration (unknown keys, bad enum values, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system or serialization failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or incompatible checkpoint / dataset file.
class CheckpointError : public IoError {
 public:
  using IoError::IoError;
};

// Where in a training run a non-finite value showed up.
struct NumericContext {
  std::optional<std::size_t> stage;
  std::optional<std::size_t> epoch;
  std::optional<std::size_t> step;
  std::string component;
};

// A NaN/Inf appeared in a loss or a gradient.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, NumericContext ctx = {})
      : std::runtime_error(what), ctx_(std::move(ctx)) {}

  const NumericContext& context() const noexcept { return ctx_; }

 private:
  NumericContext ctx_;
};

// Optimizer was asked to mutate a frozen parameter set.
class FrozenError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace rankgan
