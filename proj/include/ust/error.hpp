#pragma once

#include <stdexcept>
#include <string>

namespace ust {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo = 2,
  kData = 3,
  kNumeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_invalid(const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, what);
}
[[noreturn]] inline void throw_io(const std::string& what) {
  throw Error(ErrorCode::kIo, what);
}
[[noreturn]] inline void throw_data(const std::string& what) {
  throw Error(ErrorCode::kData, what);
}
[[noreturn]] inline void throw_numeric(const std::string& what) {
  throw Error(ErrorCode::kNumeric, what);
}

}  // namespace ust
