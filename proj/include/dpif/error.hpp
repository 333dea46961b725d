// dpif/error.hpp

// Copyright 2026  DPIF authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPIF_ERROR_HPP
#define DPIF_ERROR_HPP

#include <stdexcept>
#include <string>

namespace dpif {

enum class ErrorCode {
  invalid_argument,
  shape_mismatch,
  io,
  bad_magic,
  bad_version,
  truncated_file,
  record_mismatch,
  not_found,
  state,
};

const char* error_code_name(ErrorCode c);

/// Library-wide exception. Carries a code so callers (and the C API)
/// can distinguish failure kinds without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace dpif

#endif  // DPIF_ERROR_HPP
