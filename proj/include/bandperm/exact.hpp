#pragma once

// Brute-force Gibbs distribution on small intervals. Deliberately exhaustive:
// it is the ground truth the sampler and the uncrossing checks are tested
// against.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "bandperm/core.hpp"

namespace bandperm {

/// Largest interval length 2n+1 enumerated for finite p (9! = 362880).
inline constexpr int kMaxExhaustiveSize = 9;
/// Largest |S_W| enumerated for p = inf.
inline constexpr std::uint64_t kMaxSupportCount = 2'000'000;

/// |S_W| on [-n, n] by a transfer over the occupancy mask of the window
/// [i - W, i + W]. Saturates at UINT64_MAX.
inline std::uint64_t count_support(int W, int n) {
  ModelParams{Exponent::infinity(), W, n}.validate();
  if (W > 12) throw Error(ErrorKind::capacity, "count_support supports W <= 12");
  const int width = 2 * W + 1;
  const auto outside = [n](int v) { return v < -n || v > n; };

  std::vector<std::uint64_t> ways(std::size_t{1} << width, 0);
  std::uint32_t start = 0;
  for (int k = 0; k < width; ++k) {
    if (outside(-n - W + k)) start |= 1u << k;
  }
  ways[start] = 1;

  for (int i = -n; i <= n; ++i) {
    std::vector<std::uint64_t> next(ways.size(), 0);
    for (std::uint32_t mask = 0; mask < ways.size(); ++mask) {
      const std::uint64_t w = ways[mask];
      if (w == 0) continue;
      for (int k = 0; k < width; ++k) {
        if (mask & (1u << k)) continue;
        const std::uint32_t used = mask | (1u << k);
        // The value leaving the window can no longer be placed.
        if (!(used & 1u)) continue;
        std::uint32_t shifted = used >> 1;
        if (outside(i + 1 + W)) shifted |= 1u << (width - 1);
        std::uint64_t& slot = next[shifted];
        slot = (slot > UINT64_MAX - w) ? UINT64_MAX : slot + w;
      }
    }
    ways = std::move(next);
  }
  std::uint64_t total = 0;
  for (std::uint64_t w : ways) total = (total > UINT64_MAX - w) ? UINT64_MAX : total + w;
  return total;
}

inline void check_exhaustive_capacity(const ModelParams& params) {
  params.validate();
  if (params.p.is_finite()) {
    if (params.size() > kMaxExhaustiveSize) {
      throw Error(ErrorKind::capacity,
                  "exhaustive enumeration for finite p is capped at 2n+1 <= " +
                      std::to_string(kMaxExhaustiveSize) + ", got " +
                      std::to_string(params.size()));
    }
    return;
  }
  if (params.W > 12 || count_support(params.W, params.n) > kMaxSupportCount) {
    throw Error(ErrorKind::capacity,
                "exhaustive enumeration for p = inf is capped at |S_W| <= " +
                    std::to_string(kMaxSupportCount));
  }
}

namespace detail {

template <class Visit>
void enumerate_band(int W, int n, std::vector<int>& images, std::vector<char>& used,
                    int position, Visit& visit) {
  if (position > n) {
    visit(Permutation::from_images(images));
    return;
  }
  const int lo = std::max(-n, position - W);
  const int hi = std::min(n, position + W);
  // Value position - W must be placed now or never.
  const int forced = position - W;
  for (int v = lo; v <= hi; ++v) {
    char& u = used[static_cast<std::size_t>(v + n)];
    if (u) continue;
    if (forced >= -n && v != forced && !used[static_cast<std::size_t>(forced + n)]) continue;
    u = 1;
    images[static_cast<std::size_t>(position + n)] = v;
    enumerate_band(W, n, images, used, position + 1, visit);
    u = 0;
  }
}

}  // namespace detail

/// Visits every admissible permutation once, in lexicographic order of the
/// image sequence: all (2n+1)! for finite p, S_W for p = inf.
template <class Visit>
void for_each_permutation(const ModelParams& params, Visit&& visit) {
  check_exhaustive_capacity(params);
  const int n = params.n;
  if (params.p.is_finite()) {
    std::vector<int> images(static_cast<std::size_t>(params.size()));
    std::iota(images.begin(), images.end(), -n);
    do {
      visit(Permutation::from_images(images));
    } while (std::next_permutation(images.begin(), images.end()));
    return;
  }
  std::vector<int> images(static_cast<std::size_t>(params.size()));
  std::vector<char> used(images.size(), 0);
  detail::enumerate_band(params.W, n, images, used, -n, visit);
}

inline std::vector<Permutation> enumerate_permutations(const ModelParams& params) {
  std::vector<Permutation> out;
  for_each_permutation(params, [&](const Permutation& pi) { out.push_back(pi); });
  return out;
}

struct ExactDistribution {
  struct Entry {
    Permutation permutation;
    double probability;
  };

  ModelParams params;
  std::vector<Entry> entries;
  /// sum of exp(-energy) for finite p, |S_W| for p = inf.
  double partition_value = 0.0;

  std::size_t support_size() const noexcept { return entries.size(); }

  /// Probability of pi, 0 when it is outside the enumerated support.
  double probability(const Permutation& pi) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), pi,
                               [](const Entry& e, const Permutation& q) {
                                 return e.permutation < q;
                               });
    return (it != entries.end() && it->permutation == pi) ? it->probability : 0.0;
  }

  template <class F>
  double expectation(F&& observable) const {
    double total = 0.0;
    for (const auto& e : entries) total += e.probability * observable(e.permutation);
    return total;
  }
};

inline ExactDistribution exact_distribution(const ModelParams& params) {
  ExactDistribution out{params, {}, 0.0};
  if (params.p.is_infinite()) {
    for_each_permutation(params, [&](const Permutation& pi) {
      out.entries.push_back({pi, 0.0});
    });
    out.partition_value = static_cast<double>(out.entries.size());
    for (auto& e : out.entries) e.probability = 1.0 / out.partition_value;
    return out;
  }
  std::vector<double> weights;
  for_each_permutation(params, [&](const Permutation& pi) {
    weights.push_back(std::exp(-energy(pi, params)));
    out.entries.push_back({pi, 0.0});
  });
  out.partition_value = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    out.entries[k].probability = weights[k] / out.partition_value;
  }
  return out;
}

/// P(diam C(j) >= lambda) for every lambda in the grid.
inline std::vector<double> exact_tail_curve(const ExactDistribution& dist, int j,
                                            const std::vector<int>& lambda_grid) {
  if (!dist.params.contains(j)) {
    throw Error(ErrorKind::domain, "base point " + std::to_string(j) + " outside [-n, n]");
  }
  std::vector<double> out(lambda_grid.size(), 0.0);
  for (const auto& e : dist.entries) {
    const int diam = orbit_extent(e.permutation, j).diam();
    for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
      if (diam >= lambda_grid[k]) out[k] += e.probability;
    }
  }
  // lambda = 0 is certain; pin it instead of carrying the rounding of the sum.
  for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
    if (lambda_grid[k] <= 0) out[k] = 1.0;
  }
  return out;
}

inline double exact_tail(const ModelParams& params, int j, int lambda) {
  if (lambda < 0) throw Error(ErrorKind::domain, "lambda must be nonnegative");
  return exact_tail_curve(exact_distribution(params), j, {lambda})[0];
}

}  // namespace bandperm
