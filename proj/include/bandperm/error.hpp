#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bandperm {

enum class ErrorKind {
  domain,
  degenerate_swap,
  unsupported_exponent,
  capacity,
  not_in_event,
  crossing_condition,
  no_data,
  unfittable,
  config,
  verification,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::degenerate_swap: return "degenerate_swap";
    case ErrorKind::unsupported_exponent: return "unsupported_exponent";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::not_in_event: return "not_in_event";
    case ErrorKind::crossing_condition: return "crossing_condition";
    case ErrorKind::no_data: return "no_data";
    case ErrorKind::unfittable: return "unfittable";
    case ErrorKind::config: return "config";
    case ErrorKind::verification: return "verification";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it to an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Configuration errors additionally name the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(ErrorKind::config, key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace bandperm
