// Copyright 2026 The qmpc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace qmpc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters detected at call time (widths, shifts, shapes).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Shares that do not form a consistent replicated sharing.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// A peer went away or the fabric was torn down mid-protocol.
class ProtocolAbort : public Error {
 public:
  using Error::Error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << args);
  return oss.str();
}

}  // namespace detail

}  // namespace qmpc

#define QMPC_ENFORCE(cond, ...)                                          \
  do {                                                                   \
    if (!(cond)) {                                                       \
      throw ::qmpc::ConfigError(::qmpc::detail::concat(                  \
          __FILE__, ":", __LINE__, ": ", #cond, " ", ##__VA_ARGS__));    \
    }                                                                    \
  } while (0)
