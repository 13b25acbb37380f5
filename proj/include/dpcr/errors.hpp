#pragma once

#include <stdexcept>
#include <string>

namespace dpcr {

// Bad input data: malformed files, domain violations, strict-turnstile breaks.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Caller asked for something outside an algorithm's stated hypothesis
// (wrong stream model, lemma regime not met).
class HypothesisError : public std::runtime_error {
 public:
  explicit HypothesisError(const std::string& what) : std::runtime_error(what) {}
};

// CLI exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitHypothesis = 3,
};

}  // namespace dpcr
