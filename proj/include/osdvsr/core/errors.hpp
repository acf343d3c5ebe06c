// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace osdvsr {

/// Raised when a caller breaks an operation's preconditions (shape mismatch,
/// out-of-range argument, non-finite input where finite data is required).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One-step denoising divides by alpha_T; a zero there has no inverse.
class SingularScheduleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A loss term came out NaN/Inf. The message carries a diagnostics snapshot.
class PoisonedLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
[[noreturn]] inline void contract_fail(const std::string& what) { throw ContractViolation(what); }
}  // namespace detail

inline void require(bool condition, const std::string& what) {
  if (!condition) detail::contract_fail(what);
}

}  // namespace osdvsr
