#pragma once

#include <stdexcept>
#include <string>

namespace pfml {

/// Base error for every failure raised by the library. Messages are
/// human-readable and name the offending input where one exists.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-system or codec failure; carries the path involved.
class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& reason)
      : Error(path + ": " + reason), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace pfml
