#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace cristal {

// Domain error with a stable machine-readable name. The CLI maps these to
// exit code 2 and prints "ERROR <name>: <detail>" on stderr, so names must
// stay spelling-stable once released.
class Error : public std::runtime_error {
public:
  Error(std::string name, const std::string& detail)
      : std::runtime_error(detail), name_(std::move(name)) {}

  const std::string& name() const { return name_; }

private:
  std::string name_;
};

[[noreturn]] inline void fail(std::string name, const std::string& detail) {
  throw Error(std::move(name), detail);
}

}  // namespace cristal
