/*
 * Copyright 2026 The FedMMF Authors.
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

#ifndef FEDMMF_ERRORS_HPP_
#define FEDMMF_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace fedmmf {

// Malformed input files or records.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or argument outside an operation's contract.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Secure aggregation protocol violation (missing pair seed, too many
// dropouts, inconsistent shares).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A real value cannot be fixed-point encoded without wrapping the field.
class EncodingError : public std::range_error {
 public:
  using std::range_error::range_error;
};

}  // namespace fedmmf

#endif  // FEDMMF_ERRORS_HPP_
