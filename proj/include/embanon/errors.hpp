// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace embanon {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Wrong magic, unsupported version or malformed metadata.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Truncated payload, length mismatch or checksum failure.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// A value violates a dataset invariant (non-finite feature, label out of range, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace embanon
