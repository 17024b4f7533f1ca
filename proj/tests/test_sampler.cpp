#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <queue>
#include <set>

#include "bandperm/exact.hpp"
#include "bandperm/sampler.hpp"

namespace {

using namespace bandperm;

const Exponent kInf = Exponent::infinity();

SamplerConfig config(std::int64_t steps, std::int64_t burn_in, std::int64_t thinning,
                     std::uint64_t seed) {
  SamplerConfig c;
  c.seed = seed;
  c.steps = steps;
  c.burn_in = burn_in;
  c.thinning = thinning;
  return c;
}

std::map<Permutation, double> empirical(const ModelParams& params, const SamplerConfig& cfg) {
  std::map<Permutation, double> freq;
  std::int64_t total = 0;
  run_chain(params, cfg, [&](const Permutation& pi) {
    freq[pi] += 1.0;
    ++total;
  });
  for (auto& [pi, f] : freq) f /= static_cast<double>(total);
  return freq;
}

double total_variation(const ExactDistribution& exact, const std::map<Permutation, double>& freq) {
  double tv = 0.0;
  for (const auto& e : exact.entries) {
    auto it = freq.find(e.permutation);
    tv += std::abs(e.probability - (it == freq.end() ? 0.0 : it->second));
  }
  for (const auto& [pi, f] : freq) {
    if (exact.probability(pi) == 0.0) tv += f;
  }
  return 0.5 * tv;
}

TEST(Rng, BelowStaysInRangeAndIsRoughlyUniform) {
  Rng rng(42);
  std::vector<int> hist(7, 0);
  for (int k = 0; k < 70000; ++k) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    ++hist[v];
  }
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
  for (int k = 0; k < 1000; ++k) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, StreamsAreDistinct) {
  Rng a(1, 0), b(1, 1), c(2, 0), d(1, 0);
  const auto x = a.next();
  EXPECT_NE(x, b.next());
  EXPECT_NE(x, c.next());
  EXPECT_EQ(x, d.next());
}

TEST(RunChain, ZeroSteps) {
  const ModelParams params{Exponent(1.0), 2, 5};
  int calls = 0;
  const ChainSummary s = run_chain(params, config(0, 0, 1, 3), [&](const Permutation&) { ++calls; });
  EXPECT_EQ(calls, 0);
  EXPECT_EQ(s.retained_samples, 0);
  EXPECT_TRUE(s.final_state.is_identity());
}

TEST(RunChain, RetainedCount) {
  const ModelParams params{kInf, 2, 4};
  for (auto [steps, burn, thin] : std::vector<std::tuple<int, int, int>>{
           {100, 0, 1}, {100, 10, 7}, {1000, 999, 1}, {1000, 1000, 3}, {57, 5, 100}}) {
    std::int64_t calls = 0;
    std::int64_t last_step = 0;
    const SamplerConfig cfg = config(steps, burn, thin, 1);
    const ChainSummary s = run_chain(params, cfg, [&](const Permutation&, std::int64_t step) {
      ++calls;
      EXPECT_GT(step, burn);
      EXPECT_EQ((step - burn) % thin, 0);
      last_step = step;
    });
    EXPECT_EQ(s.retained_samples, (steps - burn) / thin);
    EXPECT_EQ(calls, s.retained_samples);
    EXPECT_EQ(cfg.expected_retained(), s.retained_samples);
  }
}

TEST(RunChain, ConfigValidation) {
  const ModelParams params{Exponent(1.0), 1, 2};
  const auto noop = [](const Permutation&) {};
  EXPECT_THROW(run_chain(params, config(10, 11, 1, 0), noop), Error);
  EXPECT_THROW(run_chain(params, config(10, 0, 0, 0), noop), Error);
  EXPECT_THROW(run_chain(params, config(-1, 0, 1, 0), noop), Error);
}

TEST(RunChain, SeededDeterminism) {
  for (const ModelParams& params : {ModelParams{Exponent(1.5), 2, 10}, ModelParams{kInf, 3, 10}}) {
    std::vector<std::vector<int>> first, second, other;
    const auto collect = [](std::vector<std::vector<int>>& into) {
      return [&into](const Permutation& pi) { into.emplace_back(pi.images().begin(), pi.images().end()); };
    };
    run_chain(params, config(20000, 100, 50, 9), collect(first));
    run_chain(params, config(20000, 100, 50, 9), collect(second));
    run_chain(params, config(20000, 100, 50, 10), collect(other));
    EXPECT_EQ(first, second);
    EXPECT_NE(first, other);
  }
}

TEST(RunChain, HardSupportIsNeverLeft) {
  for (InitialState init : {InitialState::identity, InitialState::random_in_support}) {
    const ModelParams params{kInf, 2, 30};
    SamplerConfig cfg = config(200000, 0, 97, 4);
    cfg.initial_state = init;
    const ChainSummary s = run_chain(params, cfg, [&](const Permutation& pi) {
      ASSERT_TRUE(in_support(pi, 2));
    });
    EXPECT_TRUE(in_support(s.final_state, 2));
    EXPECT_GT(s.acceptance_rate, 0.0);
  }
}

TEST(RunChain, RandomStartDiffersFromIdentity) {
  SamplerConfig cfg = config(0, 0, 1, 8);
  cfg.initial_state = InitialState::random_in_support;
  const ChainSummary hard = run_chain(ModelParams{kInf, 2, 20}, cfg, [](const Permutation&) {});
  EXPECT_FALSE(hard.final_state.is_identity());
  EXPECT_TRUE(in_support(hard.final_state, 2));
  const ChainSummary soft = run_chain(ModelParams{Exponent(1.0), 2, 20}, cfg, [](const Permutation&) {});
  EXPECT_FALSE(soft.final_state.is_identity());
}

TEST(RunChain, IncrementalEnergyAgreesWithFullRecomputation) {
  for (double p : {1.0, 1.5, 3.0}) {
    SamplerConfig cfg = config(20000, 0, 100, 12);
    cfg.verify_energy = true;
    EXPECT_NO_THROW(run_chain(ModelParams{Exponent(p), 3, 8}, cfg, [](const Permutation&) {}));
  }
}

// P(x) q A(x -> y) = P(y) q A(y -> x) for every pair of states one swap apart.
TEST(DetailedBalance, ThreeAndFivePointStates) {
  for (const ModelParams& params :
       {ModelParams{Exponent(1.0), 1, 1}, ModelParams{Exponent(2.0), 2, 1},
        ModelParams{Exponent(1.5), 1, 2}, ModelParams{kInf, 1, 1}, ModelParams{kInf, 1, 2}}) {
    const auto all = enumerate_permutations(ModelParams{Exponent(1.0), params.W, params.n});
    const auto weight = [&](const Permutation& pi) {
      if (params.p.is_infinite()) return in_support(pi, params.W) ? 1.0 : 0.0;
      return std::exp(-energy(pi, params));
    };
    const double q = proposal_probability(params);
    for (const auto& x : all) {
      if (weight(x) == 0.0) continue;
      for (int a = -params.n; a <= params.n; ++a) {
        for (int b = a + 1; b <= params.n; ++b) {
          const Permutation y = swap_images(x, a, b);
          const double forward = weight(x) * q * acceptance_probability(params, x, a, b);
          const double backward = weight(y) * q * acceptance_probability(params, y, a, b);
          ASSERT_NEAR(forward, backward, 1e-14);
        }
      }
    }
  }
}

// Any band permutation reaches the identity through in-band swaps.
TEST(Irreducibility, BandSupportConnected) {
  for (int W : {1, 2}) {
    for (int n = 1; n <= 3; ++n) {
      const auto support = enumerate_permutations({kInf, W, n});
      std::set<Permutation> reached{Permutation::identity(n)};
      std::queue<Permutation> frontier;
      frontier.push(Permutation::identity(n));
      while (!frontier.empty()) {
        const Permutation x = frontier.front();
        frontier.pop();
        for (int a = -n; a <= n; ++a) {
          for (int b = a + 1; b <= n; ++b) {
            Permutation y = swap_images(x, a, b);
            if (in_support(y, W) && reached.insert(y).second) frontier.push(y);
          }
        }
      }
      EXPECT_EQ(reached.size(), support.size()) << "W=" << W << " n=" << n;
    }
  }
}

TEST(RunChain, MatchesExactDistributionAtPOne) {
  const ModelParams params{Exponent(1.0), 1, 1};
  const auto freq = empirical(params, config(1'000'000, 10'000, 10, 7));
  const auto exact = exact_distribution(params);
  EXPECT_NEAR(freq.at(Permutation::identity(1)), 0.7544, 0.01);
  EXPECT_LT(total_variation(exact, freq), 0.02);
}

TEST(RunChain, UniformOnHardSupport) {
  const ModelParams params{kInf, 1, 1};
  const auto freq = empirical(params, default_sampler_config(params, 1'000'000, 2));
  ASSERT_EQ(freq.size(), 3u);
  for (const auto& [pi, f] : freq) EXPECT_NEAR(f, 1.0 / 3.0, 0.01);
}

TEST(RunChain, TotalVariationShrinksWithSteps) {
  for (const ModelParams& params : {ModelParams{Exponent(1.0), 1, 2}, ModelParams{kInf, 2, 2}}) {
    const auto exact = exact_distribution(params);
    double previous = 1.0;
    for (std::int64_t steps : {10'000, 100'000, 1'000'000}) {
      const double tv = total_variation(exact, empirical(params, default_sampler_config(params, steps, 5)));
      EXPECT_LT(tv, previous) << "steps=" << steps;
      previous = tv;
    }
    EXPECT_LT(previous, 0.02);
  }
}

TEST(CycleObservables, Identity) {
  const CycleRecord r = observe_cycles(Permutation::identity(4), 2, 7);
  EXPECT_EQ(r.step, 7);
  EXPECT_EQ(r.diam, 0);
  EXPECT_EQ(r.displacement0, 0);
  EXPECT_EQ(r.max_c0, 0);
  EXPECT_EQ(r.min_c0, 0);
}

TEST(CycleObservables, TailAndDisplacementMatchOracle) {
  {
    const ModelParams params{kInf, 1, 1};
    std::int64_t hits = 0, total = 0;
    sample_cycle_observables(params, default_sampler_config(params, 1'000'000, 3), 0,
                             [&](const CycleRecord& r) {
                               hits += r.diam >= 1;
                               ++total;
                             });
    EXPECT_NEAR(static_cast<double>(hits) / total, 2.0 / 3.0, 0.01);
  }
  {
    const ModelParams params{Exponent(1.0), 1, 1};
    const double expected =
        exact_distribution(params).expectation([](const Permutation& pi) { return std::abs(pi(0)); });
    double sum = 0.0;
    std::int64_t total = 0;
    sample_cycle_observables(params, default_sampler_config(params, 1'000'000, 4), 0,
                             [&](const CycleRecord& r) {
                               sum += r.displacement0;
                               ++total;
                             });
    EXPECT_NEAR(sum / total, expected, 0.01);
  }
  EXPECT_THROW(sample_cycle_observables(ModelParams{kInf, 1, 1}, config(1, 0, 1, 0), 2,
                                        [](const CycleRecord&) {}),
               Error);
}

}  // namespace
