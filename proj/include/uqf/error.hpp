#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace uqf {

/// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf appeared in an activation or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or an unsupported mode request.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. Carries the byte offset where decoding stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace uqf
