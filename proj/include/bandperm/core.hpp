#pragma once

// Permutations of the signed interval [-n, n], their cycles, displacement
// energy and band-support membership.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bandperm/error.hpp"

namespace bandperm {

/// Displacement exponent p: a finite real >= 1, or the hard-cutoff marker.
class Exponent {
 public:
  explicit Exponent(double value) : value_(value) {
    if (std::isnan(value) || value < 1.0) {
      throw Error(ErrorKind::domain,
                  "exponent p must be >= 1 or inf, got " + std::to_string(value));
    }
  }

  static Exponent infinity() {
    return Exponent(std::numeric_limits<double>::infinity());
  }

  bool is_infinite() const noexcept { return std::isinf(value_); }
  bool is_finite() const noexcept { return !is_infinite(); }
  double value() const noexcept { return value_; }

  friend bool operator==(const Exponent&, const Exponent&) = default;

 private:
  double value_;
};

struct ModelParams {
  Exponent p{1.0};
  int W = 1;
  int n = 1;

  int size() const noexcept { return 2 * n + 1; }
  bool contains(int i) const noexcept { return i >= -n && i <= n; }

  void validate() const {
    if (W < 1) throw Error(ErrorKind::domain, "bandwidth W must be >= 1");
    if (n < 1) throw Error(ErrorKind::domain, "half-length n must be >= 1");
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// A bijection of [-n, n]. Storage is offset so that every public accessor
/// speaks in signed coordinates.
class Permutation {
 public:
  /// Identity on [-n, n].
  static Permutation identity(int n) {
    if (n < 1) throw Error(ErrorKind::domain, "half-length n must be >= 1");
    Permutation out;
    out.n_ = n;
    out.image_.resize(static_cast<std::size_t>(2 * n + 1));
    for (int i = -n; i <= n; ++i) out.image_[out.slot(i)] = i;
    return out;
  }

  /// Builds from the image list for i = -n..n. Throws on a non-bijection.
  static Permutation from_images(std::vector<int> images) {
    if (images.empty() || images.size() % 2 == 0) {
      throw Error(ErrorKind::domain,
                  "image list must have odd length 2n+1, got " +
                      std::to_string(images.size()));
    }
    Permutation out;
    out.n_ = static_cast<int>(images.size() / 2);
    out.image_ = std::move(images);
    std::vector<char> seen(out.image_.size(), 0);
    for (int v : out.image_) {
      if (v < -out.n_ || v > out.n_) {
        throw Error(ErrorKind::domain,
                    "image " + std::to_string(v) + " outside [-n, n]");
      }
      char& s = seen[out.slot(v)];
      if (s) throw Error(ErrorKind::domain, "image " + std::to_string(v) + " repeated");
      s = 1;
    }
    return out;
  }

  int n() const noexcept { return n_; }
  int size() const noexcept { return static_cast<int>(image_.size()); }
  bool contains(int i) const noexcept { return i >= -n_ && i <= n_; }

  int operator()(int i) const noexcept { return image_[slot(i)]; }

  int at(int i) const {
    check_domain(i);
    return (*this)(i);
  }

  /// Images for i = -n..n.
  std::span<const int> images() const noexcept { return image_; }

  /// In-place exchange of the images of a and b. Unchecked; the sampler's
  /// hot loop relies on this.
  void exchange_images(int a, int b) noexcept {
    std::swap(image_[slot(a)], image_[slot(b)]);
  }

  bool is_identity() const noexcept {
    for (int i = -n_; i <= n_; ++i) {
      if ((*this)(i) != i) return false;
    }
    return true;
  }

  void check_domain(int i) const {
    if (!contains(i)) {
      throw Error(ErrorKind::domain, "point " + std::to_string(i) + " outside [-" +
                                         std::to_string(n_) + ", " + std::to_string(n_) +
                                         "]");
    }
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;
  friend auto operator<=>(const Permutation& a, const Permutation& b) {
    return a.image_ <=> b.image_;
  }

 private:
  Permutation() = default;

  std::size_t slot(int i) const noexcept { return static_cast<std::size_t>(i + n_); }

  int n_ = 0;
  std::vector<int> image_;
};

struct CycleStats {
  std::vector<int> elements;  // in orbit order, starting at the base point
  int length = 0;
  int min = 0;
  int max = 0;
  int diam = 0;
};

/// The orbit of j under iteration of pi.
inline CycleStats cycle_of(const Permutation& pi, int j) {
  pi.check_domain(j);
  CycleStats out;
  out.min = out.max = j;
  int z = j;
  do {
    out.elements.push_back(z);
    out.min = std::min(out.min, z);
    out.max = std::max(out.max, z);
    z = pi(z);
  } while (z != j);
  out.length = static_cast<int>(out.elements.size());
  out.diam = out.max - out.min;
  return out;
}

/// Extremes of the orbit of j without materializing it.
struct OrbitExtent {
  int min = 0;
  int max = 0;
  int length = 0;
  int diam() const noexcept { return max - min; }
};

inline OrbitExtent orbit_extent(const Permutation& pi, int j) noexcept {
  OrbitExtent out{j, j, 0};
  int z = j;
  do {
    out.min = std::min(out.min, z);
    out.max = std::max(out.max, z);
    ++out.length;
    z = pi(z);
  } while (z != j);
  return out;
}

/// (1/W^p) * sum_i |pi(i) - i|^p.
inline double energy(const Permutation& pi, const ModelParams& params) {
  if (params.p.is_infinite()) {
    throw Error(ErrorKind::unsupported_exponent,
                "energy is undefined for p = inf; use in_support");
  }
  const double p = params.p.value();
  double total = 0.0;
  for (int i = -pi.n(); i <= pi.n(); ++i) {
    const int d = std::abs(pi(i) - i);
    if (d != 0) total += std::pow(static_cast<double>(d), p);
  }
  return total / std::pow(static_cast<double>(params.W), p);
}

inline int max_displacement(const Permutation& pi) noexcept {
  int out = 0;
  for (int i = -pi.n(); i <= pi.n(); ++i) out = std::max(out, std::abs(pi(i) - i));
  return out;
}

inline bool in_support(const Permutation& pi, int W) noexcept {
  return max_displacement(pi) <= W;
}

/// rho(a) = pi(b), rho(b) = pi(a), rho = pi elsewhere.
inline Permutation swap_images(const Permutation& pi, int a, int b) {
  pi.check_domain(a);
  pi.check_domain(b);
  if (a == b) {
    throw Error(ErrorKind::degenerate_swap,
                "swap_images needs distinct points, got a = b = " + std::to_string(a));
  }
  Permutation out = pi;
  out.exchange_images(a, b);
  return out;
}

/// Conjugation by the reflection i -> -i: rho(i) = -pi(-i).
inline Permutation reflect(const Permutation& pi) {
  std::vector<int> images(static_cast<std::size_t>(pi.size()));
  for (int i = -pi.n(); i <= pi.n(); ++i) {
    images[static_cast<std::size_t>(i + pi.n())] = -pi(-i);
  }
  return Permutation::from_images(std::move(images));
}

/// Tabulated |d|^p / W^p for d in [0, 2n], used wherever the energy is
/// updated incrementally.
class DisplacementCost {
 public:
  explicit DisplacementCost(const ModelParams& params) {
    if (params.p.is_infinite()) {
      throw Error(ErrorKind::unsupported_exponent, "no displacement cost at p = inf");
    }
    const double scale = std::pow(static_cast<double>(params.W), params.p.value());
    table_.resize(static_cast<std::size_t>(2 * params.n + 1));
    for (std::size_t d = 0; d < table_.size(); ++d) {
      table_[d] = d == 0 ? 0.0 : std::pow(static_cast<double>(d), params.p.value()) / scale;
    }
  }

  double operator()(int displacement) const noexcept {
    return table_[static_cast<std::size_t>(std::abs(displacement))];
  }

  /// Energy change of exchanging the images of a and b.
  double swap_delta(const Permutation& pi, int a, int b) const noexcept {
    const int pa = pi(a);
    const int pb = pi(b);
    return (*this)(pb - a) + (*this)(pa - b) - (*this)(pa - a) - (*this)(pb - b);
  }

 private:
  std::vector<double> table_;
};

}  // namespace bandperm
