// Copyright 2026 The crobo Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CROBO_ERRORS_HPP
#define CROBO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace crobo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration values (ranges, inconsistent dimensions).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Arguments that violate an operation's preconditions.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Non-finite losses or gradients, singular linear systems.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures. The message always carries the offending path.
class IoError : public Error {
 public:
  IoError(const std::string& what, std::string path)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace crobo

#endif  // CROBO_ERRORS_HPP
