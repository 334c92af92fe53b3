#pragma once

#include <stdexcept>
#include <string>

namespace hgtok {

// Coarse failure classes. The CLI maps them onto exit codes.
enum class ErrorKind {
  kUsage,    // bad arguments or configuration
  kData,     // malformed or inconsistent input data
  kNumeric,  // non-finite values, dimension mismatches
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_usage(const std::string& msg) { throw Error(ErrorKind::kUsage, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw Error(ErrorKind::kData, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { throw Error(ErrorKind::kNumeric, msg); }

}  // namespace hgtok
