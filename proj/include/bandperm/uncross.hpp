#pragma once

// The uncrossing map at a threshold t >= 0.
//
// Walk the orbit of 0. The first up-crossing is the first step x -> u with
// x <= t < u; the last down-crossing is the last step y -> v (within one
// traversal of the cycle) with v <= t < y. Uncrossing exchanges the images of
// x and y, so x -> v closes the orbit of 0 below the threshold and y -> u
// splits the excursion above it off into its own cycle.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "bandperm/core.hpp"

namespace bandperm {

struct UpCrossing {
  int index = 0;  // i_first: x = pi^index(0)
  int from = 0;   // x
  int to = 0;     // u = pi(x)
};

struct DownCrossing {
  int index = 0;  // i_last: y = pi^index(0)
  int from = 0;   // y
  int to = 0;     // v = pi(y)
};

struct CrossingRecord {
  int threshold = 0;
  int i_first = 0;
  int i_last = 0;
  int x = 0, u = 0, y = 0, v = 0;
};

namespace detail {

inline void require_threshold(int t) {
  if (t < 0) throw Error(ErrorKind::domain, "threshold must be >= 0, got " + std::to_string(t));
}

}  // namespace detail

inline std::optional<UpCrossing> first_upcrossing(const Permutation& pi, int t) {
  detail::require_threshold(t);
  int z = 0;
  int index = 0;
  do {
    const int next = pi(z);
    if (z <= t && t < next) return UpCrossing{index, z, next};
    z = next;
    ++index;
  } while (z != 0);
  return std::nullopt;
}

inline std::optional<DownCrossing> last_downcrossing(const Permutation& pi, int t) {
  detail::require_threshold(t);
  std::optional<DownCrossing> last;
  int z = 0;
  int index = 0;
  do {
    const int next = pi(z);
    if (next <= t && t < z) last = DownCrossing{index, z, next};
    z = next;
    ++index;
  } while (z != 0);
  return last;
}

/// Both crossings, or nothing when max C(0) <= t.
inline std::optional<CrossingRecord> crossing_record(const Permutation& pi, int t) {
  const auto up = first_upcrossing(pi, t);
  if (!up) return std::nullopt;
  const auto down = last_downcrossing(pi, t);
  return CrossingRecord{t, up->index, down->index, up->from, up->to, down->from, down->to};
}

inline Permutation uncross(const Permutation& pi, int t) {
  const auto rec = crossing_record(pi, t);
  if (!rec) {
    throw Error(ErrorKind::not_in_event,
                "uncross: the cycle of 0 never exceeds the threshold " + std::to_string(t));
  }
  return swap_images(pi, rec->x, rec->y);
}

/// The same map applied to the lower side of the cycle: requires
/// min C(0) < -t and leaves min C(0) >= -t. Realized by conjugating with the
/// reflection i -> -i.
inline Permutation uncross_minimum(const Permutation& pi, int t) {
  return reflect(uncross(reflect(pi), t));
}

inline int max_of_cycle_at_zero(const Permutation& pi) { return orbit_extent(pi, 0).max; }

/// Every pi with uncross(pi, t) == tau (restricted to S_W when p = inf), in
/// lexicographic order. Candidates are tau with the images of x and y
/// exchanged, x on the cycle of 0 and y, tau(y) > t; each is kept only if it
/// maps back to tau.
inline std::vector<Permutation> uncross_preimage(const Permutation& tau, int t,
                                                 const ModelParams& params) {
  detail::require_threshold(t);
  const OrbitExtent zero = orbit_extent(tau, 0);
  if (zero.max > t) {
    throw Error(ErrorKind::domain, "uncross_preimage: max C(0) = " + std::to_string(zero.max) +
                                       " exceeds the threshold " + std::to_string(t));
  }
  std::vector<int> sources;
  int z = 0;
  do {
    sources.push_back(z);
    z = tau(z);
  } while (z != 0);

  std::vector<Permutation> out;
  for (int y = t + 1; y <= tau.n(); ++y) {
    if (tau(y) <= t) continue;
    for (int x : sources) {
      // At p = inf both rewired arrows x -> tau(y) and y -> tau(x) must stay
      // within the band; checking them first keeps sampled use cheap.
      if (params.p.is_infinite() &&
          (std::abs(tau(y) - x) > params.W || std::abs(tau(x) - y) > params.W)) {
        continue;
      }
      Permutation pi = swap_images(tau, x, y);
      if (params.p.is_infinite() && !in_support(pi, params.W)) continue;
      if (uncross(pi, t) == tau) out.push_back(std::move(pi));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// sum over the preimage of P(pi) / P(tau). For p = inf this is the
/// preimage size.
inline double preimage_weight_ratio(const Permutation& tau, int t, const ModelParams& params) {
  const auto pre = uncross_preimage(tau, t, params);
  if (params.p.is_infinite()) return static_cast<double>(pre.size());
  const double base = energy(tau, params);
  double total = 0.0;
  for (const auto& pi : pre) total += std::exp(base - energy(pi, params));
  return total;
}

struct RatioCheck {
  double ratio = 0.0;
  double bound = 0.0;
  bool satisfied = false;
};

/// Compares P(tau with the images of a and b exchanged) / P(tau) against
/// exp(-|min(b, tau(b)) - max(a, tau(a))|^p / W^p). Needs a, tau(a) <= t and
/// b, tau(b) > t.
inline RatioCheck crossing_ratio_check(const Permutation& tau, int a, int b, int t,
                                       const ModelParams& params) {
  if (params.p.is_infinite()) {
    throw Error(ErrorKind::unsupported_exponent, "crossing_ratio_check needs finite p");
  }
  tau.check_domain(a);
  tau.check_domain(b);
  const int ta = tau(a);
  const int tb = tau(b);
  if (!(a <= t && ta <= t && t < b && t < tb)) {
    throw Error(ErrorKind::crossing_condition,
                "crossing_ratio_check needs a, tau(a) <= t < b, tau(b)");
  }
  const double p = params.p.value();
  const double scale = std::pow(static_cast<double>(params.W), p);
  const auto cost = [&](int d) { return std::pow(static_cast<double>(std::abs(d)), p) / scale; };
  const double delta = cost(tb - a) + cost(ta - b) - cost(ta - a) - cost(tb - b);
  RatioCheck out;
  out.ratio = std::exp(-delta);
  out.bound = std::exp(-cost(std::min(b, tb) - std::max(a, ta)));
  out.satisfied = out.ratio <= out.bound * (1.0 + 1e-9);
  return out;
}

}  // namespace bandperm
