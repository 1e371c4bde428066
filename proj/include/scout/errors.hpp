// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace scout {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kCheckFailure = 5,
};

/// Base of every error raised by the library. Each subclass knows the exit
/// code the CLI reports for it.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kFailure; }
};

/// Operand shapes are incompatible.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced or consumed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// API misuse: non-scalar loss, desynchronized cache position, bad flags.
class UsageError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
};

/// Invalid configuration values or a malformed config file.
class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

/// Missing, unreadable or corrupt files.
class IoError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kIo; }
};

/// Bad user-supplied data, e.g. a token id outside the vocabulary.
class InputError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
};

/// Broken internal invariant. Indicates a bug, never bad input.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace scout
