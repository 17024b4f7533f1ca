#pragma once

// JSON and text encodings shared by every module and the CLI. A permutation
// is the JSON array of its images for i = -n..n.

#include <charconv>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "bandperm/core.hpp"

namespace bandperm {

inline nlohmann::json to_json(const Permutation& pi) {
  return nlohmann::json(std::vector<int>(pi.images().begin(), pi.images().end()));
}

inline Permutation permutation_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorKind::domain, "permutation must be a JSON array");
  std::vector<int> images;
  images.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number_integer()) {
      throw Error(ErrorKind::domain, "permutation entries must be integers");
    }
    images.push_back(v.get<int>());
  }
  return Permutation::from_images(std::move(images));
}

/// "inf" or the shortest round-tripping decimal.
inline std::string format_exponent(const Exponent& p) {
  if (p.is_infinite()) return "inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, p.value());
  return std::string(buf, res.ptr);
}

inline Exponent parse_exponent(const std::string& text) {
  if (text == "inf" || text == "infinity" || text == "INFINITY" || text == "Inf") {
    return Exponent::infinity();
  }
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::domain, "cannot parse exponent '" + text + "'");
  }
  return Exponent(v);
}

inline nlohmann::json exponent_to_json(const Exponent& p) {
  if (p.is_infinite()) return "inf";
  return p.value();
}

/// Shortest round-trip representation; deterministic across runs.
inline std::string format_real(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline nlohmann::json to_json(const ModelParams& params) {
  return {{"p", exponent_to_json(params.p)}, {"W", params.W}, {"n", params.n}};
}

}  // namespace bandperm
