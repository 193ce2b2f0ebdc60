/*
 * Copyright 2026 The dpda Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
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

namespace dpda {

// Operand shapes do not chain.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite input where a finite value is required.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid hyperparameters, config keys or incompatible artifacts.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed text input. line() is 1-based, 0 when not line oriented.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what
                                : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A bookkeeping invariant broke; indicates a bug, not bad input.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace dpda
