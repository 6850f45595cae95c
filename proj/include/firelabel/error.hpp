#pragma once

#include <stdexcept>
#include <string>

namespace firelabel {

// Error categories map onto CLI exit codes: validation -> 1, io/protocol -> 2.
enum class ErrorKind { validation, io, protocol };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

struct ProtocolError : Error {
  explicit ProtocolError(const std::string& what) : Error(ErrorKind::protocol, what) {}
};

inline int exit_code(ErrorKind kind) {
  return kind == ErrorKind::validation ? 1 : 2;
}

}  // namespace firelabel
