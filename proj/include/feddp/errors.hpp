/*
 * Copyright 2026 The FedDP Simulator Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDDP_ERRORS_HPP_
#define FEDDP_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace feddp {

enum class ErrorKind {
  kStructural,  // shapes, layouts, missing layers, empty inputs
  kNumeric,     // non-finite values, divergence
  kDomain,      // argument outside the mathematical domain
  kProtocol,    // federated protocol violations (e.g. mixed rounds)
  kValidation,  // configuration constraint violations
  kIo,
};

inline const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kStructural: return "structural error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kProtocol: return "protocol error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kIo: return "I/O error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class TypedError : public Error {
 public:
  explicit TypedError(const std::string& message) : Error(K, message) {}
};

using StructuralError = TypedError<ErrorKind::kStructural>;
using NumericError = TypedError<ErrorKind::kNumeric>;
using DomainError = TypedError<ErrorKind::kDomain>;
using ProtocolError = TypedError<ErrorKind::kProtocol>;
using ValidationError = TypedError<ErrorKind::kValidation>;
using IoError = TypedError<ErrorKind::kIo>;

}  // namespace feddp

#endif  // FEDDP_ERRORS_HPP_
