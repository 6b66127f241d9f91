/*
 * Copyright (c) 2026, The fodswin authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace fodswin {

enum class ErrorKind {
  Argument,
  Format,
  Unsupported,
  IO,
  Numerical,
  Sampling,
  Config,
  EmptySelection,
  AllUndefined,
};

/// Base exception for every failure raised by the core library. The kind
/// maps one-to-one onto the status codes of the C API.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& w) : Error(ErrorKind::Argument, w) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& w) : Error(ErrorKind::Format, w) {}
};

class UnsupportedError : public Error {
 public:
  explicit UnsupportedError(const std::string& w) : Error(ErrorKind::Unsupported, w) {}
};

class IOError : public Error {
 public:
  explicit IOError(const std::string& w) : Error(ErrorKind::IO, w) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& w) : Error(ErrorKind::Numerical, w) {}
};

class SamplingError : public Error {
 public:
  explicit SamplingError(const std::string& w) : Error(ErrorKind::Sampling, w) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};

/// Statistics were requested over a selection with no voxels.
class EmptySelectionError : public Error {
 public:
  explicit EmptySelectionError(const std::string& w) : Error(ErrorKind::EmptySelection, w) {}
};

/// Every selected voxel had an undefined value.
class AllUndefinedError : public Error {
 public:
  explicit AllUndefinedError(const std::string& w) : Error(ErrorKind::AllUndefined, w) {}
};

}  // namespace fodswin
