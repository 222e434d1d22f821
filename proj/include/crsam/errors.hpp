// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace crsam {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (model spec, optimizer, config file).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Violated precondition on a library call (dimension mismatch, bad argument).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite value.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, std::optional<std::int64_t> step = std::nullopt)
      : Error(step ? what + " (step " + std::to_string(*step) + ")" : what), step_(step) {}

  std::optional<std::int64_t> step() const { return step_; }

 private:
  std::optional<std::int64_t> step_;
};

/// Quantity undefined at the given input, e.g. C(w) at a critical point.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Every sample of a stochastic estimate was degenerate.
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary input; carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace crsam
