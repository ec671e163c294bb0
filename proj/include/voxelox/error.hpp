#pragma once

#include <stdexcept>
#include <string>

namespace voxelox {

enum class ErrorKind {
  Usage = 1,
  Validation = 2,
  Io = 3,
};

/// Library-wide exception. The kind doubles as the CLI exit code.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_validation(const std::string& what) {
  throw Error(ErrorKind::Validation, what);
}

[[noreturn]] inline void throw_io(const std::string& what) {
  throw Error(ErrorKind::Io, what);
}

[[noreturn]] inline void throw_usage(const std::string& what) {
  throw Error(ErrorKind::Usage, what);
}

}  // namespace voxelox
