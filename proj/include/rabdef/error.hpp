#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace rabdef {

enum class ErrorCode {
  invalid_argument,
  shape_mismatch,
  empty_input,
  format,
  insufficient_data,
  divergence,
  degenerate_ordering,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace rabdef
