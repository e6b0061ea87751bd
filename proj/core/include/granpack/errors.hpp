#pragma once

#include <stdexcept>
#include <string>

namespace granpack {

// Base for every recoverable failure the library reports. `code()` is a
// stable upper-case identifier that the command line tool prints verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error("CONFIG_INVALID", field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace granpack
