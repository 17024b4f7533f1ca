#pragma once

// Metropolis chain over image swaps targeting the band Gibbs measure.
//
// Each step draws an unordered pair {a, b}, a != b, uniformly and exchanges
// pi(a) and pi(b). For finite p the move is accepted with probability
// min(1, exp(-dE)); for p = inf it is accepted iff both new displacements are
// at most W. The proposal is symmetric, so detailed balance reduces to the
// acceptance rule.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdlib>

#include "bandperm/core.hpp"
#include "bandperm/rng.hpp"

namespace bandperm {

enum class InitialState { identity, random_in_support };

struct SamplerConfig {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::int64_t steps = 0;
  std::int64_t burn_in = 0;
  std::int64_t thinning = 1;
  InitialState initial_state = InitialState::identity;
  /// Recompute the full energy after every accepted move and compare it with
  /// the incremental value.
  bool verify_energy = false;

  void validate() const {
    if (steps < 0) throw Error(ErrorKind::config, "steps must be nonnegative");
    if (burn_in < 0) throw Error(ErrorKind::config, "burn_in must be nonnegative");
    if (burn_in > steps) throw Error(ErrorKind::config, "burn_in must not exceed steps");
    if (thinning < 1) throw Error(ErrorKind::config, "thinning must be >= 1");
  }

  std::int64_t expected_retained() const noexcept { return (steps - burn_in) / thinning; }
};

inline std::int64_t default_burn_in(const ModelParams& params) {
  return 10LL * params.size() * params.W;
}

inline std::int64_t default_thinning(const ModelParams& params) { return params.size(); }

/// Defaults for a run of `steps` proposals. The burn-in is clipped to half the
/// run so short chains still retain samples.
inline SamplerConfig default_sampler_config(const ModelParams& params, std::int64_t steps,
                                            std::uint64_t seed) {
  SamplerConfig cfg;
  cfg.seed = seed;
  cfg.steps = steps;
  cfg.burn_in = std::min(default_burn_in(params), steps / 2);
  cfg.thinning = default_thinning(params);
  return cfg;
}

struct ChainSummary {
  std::int64_t retained_samples = 0;
  std::int64_t accepted = 0;
  double acceptance_rate = 0.0;
  Permutation final_state = Permutation::identity(1);
};

/// Probability that one step proposes a given unordered pair.
inline double proposal_probability(const ModelParams& params) {
  const double m = params.size();
  return 2.0 / (m * (m - 1.0));
}

/// Metropolis acceptance of exchanging the images of a and b in pi.
inline double acceptance_probability(const ModelParams& params, const Permutation& pi, int a,
                                     int b) {
  const Permutation proposal = swap_images(pi, a, b);
  if (params.p.is_infinite()) return in_support(proposal, params.W) ? 1.0 : 0.0;
  return std::min(1.0, std::exp(energy(pi, params) - energy(proposal, params)));
}

namespace detail {

inline Permutation initial_state(const ModelParams& params, InitialState kind, Rng& rng) {
  Permutation pi = Permutation::identity(params.n);
  if (kind == InitialState::identity) return pi;
  const int n = params.n;
  const auto m = static_cast<std::uint64_t>(params.size());
  if (params.p.is_finite()) {
    for (std::uint64_t k = m - 1; k > 0; --k) {
      const auto r = rng.below(k + 1);
      pi.exchange_images(static_cast<int>(k) - n, static_cast<int>(r) - n);
    }
    return pi;
  }
  // Scramble within S_W by local swaps that never leave the support.
  const int W = params.W;
  const std::int64_t moves = 10LL * params.size() * W;
  for (std::int64_t s = 0; s < moves; ++s) {
    const int a = static_cast<int>(rng.below(m)) - n;
    const int offset = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * W))) - W;
    const int b = a + (offset >= 0 ? offset + 1 : offset);
    if (b < -n || b > n) continue;
    if (std::abs(pi(b) - a) <= W && std::abs(pi(a) - b) <= W) pi.exchange_images(a, b);
  }
  return pi;
}

}  // namespace detail

/// Runs the chain and hands every retained state to `observer`, either as
/// observer(pi) or observer(pi, step_index). Step indices are 1-based; state
/// s is retained when s > burn_in and (s - burn_in) % thinning == 0.
template <class Observer>
ChainSummary run_chain(const ModelParams& params, const SamplerConfig& config,
                       Observer&& observer) {
  params.validate();
  config.validate();
  Rng rng(config.seed, config.stream);
  Permutation pi = detail::initial_state(params, config.initial_state, rng);

  const int n = params.n;
  const int W = params.W;
  const auto m = static_cast<std::uint64_t>(params.size());
  const bool hard = params.p.is_infinite();
  const DisplacementCost cost = hard ? DisplacementCost(ModelParams{Exponent(1.0), W, n})
                                     : DisplacementCost(params);
  double running_energy = (!hard && config.verify_energy) ? energy(pi, params) : 0.0;

  ChainSummary summary;
  std::int64_t countdown = config.burn_in + config.thinning;
  for (std::int64_t step = 1; step <= config.steps; ++step) {
    const auto ia = rng.below(m);
    auto ib = rng.below(m - 1);
    if (ib >= ia) ++ib;
    const int a = static_cast<int>(ia) - n;
    const int b = static_cast<int>(ib) - n;

    bool accept;
    if (hard) {
      accept = std::abs(pi(b) - a) <= W && std::abs(pi(a) - b) <= W;
    } else {
      const double delta = cost.swap_delta(pi, a, b);
      accept = delta <= 0.0 || rng.uniform() < std::exp(-delta);
      if (accept && config.verify_energy) {
        running_energy += delta;
        pi.exchange_images(a, b);
        const double full = energy(pi, params);
        if (std::abs(full - running_energy) > 1e-9 * std::max(1.0, std::abs(full))) {
          throw Error(ErrorKind::verification,
                      "incremental energy drifted from full recomputation at step " +
                          std::to_string(step));
        }
        running_energy = full;
        pi.exchange_images(a, b);
      }
    }
    if (accept) {
      pi.exchange_images(a, b);
      ++summary.accepted;
    }

    if (--countdown == 0) {
      countdown = config.thinning;
      ++summary.retained_samples;
      if constexpr (std::invocable<Observer&, const Permutation&, std::int64_t>) {
        observer(static_cast<const Permutation&>(pi), step);
      } else {
        observer(static_cast<const Permutation&>(pi));
      }
    }
  }
  summary.acceptance_rate =
      config.steps > 0 ? static_cast<double>(summary.accepted) / static_cast<double>(config.steps)
                       : 0.0;
  summary.final_state = std::move(pi);
  return summary;
}

/// Per-sample observables: the diameter of the cycle of j, and the
/// displacement and cycle extremes at the origin.
struct CycleRecord {
  std::int64_t step = 0;
  int diam = 0;
  int displacement0 = 0;
  int max_c0 = 0;
  int min_c0 = 0;
};

inline CycleRecord observe_cycles(const Permutation& pi, int j, std::int64_t step) {
  const OrbitExtent at_zero = orbit_extent(pi, 0);
  CycleRecord rec;
  rec.step = step;
  rec.diam = j == 0 ? at_zero.diam() : orbit_extent(pi, j).diam();
  rec.displacement0 = std::abs(pi(0));
  rec.max_c0 = at_zero.max;
  rec.min_c0 = at_zero.min;
  return rec;
}

/// Streams one CycleRecord per retained sample; permutations are not kept.
template <class Sink>
ChainSummary sample_cycle_observables(const ModelParams& params, const SamplerConfig& config,
                                      int j, Sink&& sink) {
  if (!params.contains(j)) {
    throw Error(ErrorKind::domain, "base point " + std::to_string(j) + " outside [-n, n]");
  }
  return run_chain(params, config, [&](const Permutation& pi, std::int64_t step) {
    sink(observe_cycles(pi, j, step));
  });
}

}  // namespace bandperm
