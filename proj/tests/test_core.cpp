#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "bandperm/core.hpp"
#include "bandperm/exact.hpp"
#include "bandperm/io.hpp"

namespace {

using namespace bandperm;

Permutation from_pairs(int n, std::initializer_list<std::pair<int, int>> moves) {
  std::vector<int> images(static_cast<std::size_t>(2 * n + 1));
  std::iota(images.begin(), images.end(), -n);
  for (auto [from, to] : moves) images[static_cast<std::size_t>(from + n)] = to;
  return Permutation::from_images(images);
}

Permutation random_permutation(int n, std::mt19937_64& gen) {
  std::vector<int> images(static_cast<std::size_t>(2 * n + 1));
  std::iota(images.begin(), images.end(), -n);
  std::shuffle(images.begin(), images.end(), gen);
  return Permutation::from_images(images);
}

// Oracle: the orbit as the set {pi^k(j) : 0 <= k < (2n+1)}, by repeated
// application without looking for the return to j.
std::set<int> orbit_oracle(const Permutation& pi, int j) {
  std::set<int> out;
  int z = j;
  for (int k = 0; k < pi.size(); ++k) {
    out.insert(z);
    z = pi(z);
  }
  return out;
}

double energy_oracle(const Permutation& pi, double p, int W) {
  double total = 0.0;
  for (int i = -pi.n(); i <= pi.n(); ++i) {
    total += std::pow(std::abs(pi(i) - i) / static_cast<double>(W), p);
  }
  return total;
}

TEST(Permutation, RejectsNonBijections) {
  EXPECT_THROW(Permutation::from_images({0, 0, 1}), Error);
  EXPECT_THROW(Permutation::from_images({-1, 0, 2}), Error);
  EXPECT_THROW(Permutation::from_images({-1, 0}), Error);
  EXPECT_NO_THROW(Permutation::from_images({1, 0, -1}));
}

TEST(Permutation, SignedIndexing) {
  const Permutation pi = from_pairs(2, {{0, 1}, {1, 0}});
  EXPECT_EQ(pi(0), 1);
  EXPECT_EQ(pi(1), 0);
  EXPECT_EQ(pi(-2), -2);
  EXPECT_THROW(pi.at(3), Error);
}

TEST(CycleOf, FixedPoint) {
  const CycleStats c = cycle_of(Permutation::identity(2), 0);
  EXPECT_EQ(c.elements, std::vector<int>{0});
  EXPECT_EQ(c.length, 1);
  EXPECT_EQ(c.diam, 0);
}

TEST(CycleOf, Transposition) {
  const CycleStats c = cycle_of(from_pairs(2, {{0, 1}, {1, 0}}), 0);
  EXPECT_EQ(std::set<int>(c.elements.begin(), c.elements.end()), (std::set<int>{0, 1}));
  EXPECT_EQ(c.length, 2);
  EXPECT_EQ(c.diam, 1);
}

TEST(CycleOf, ThreeCycle) {
  const Permutation pi = from_pairs(3, {{0, 3}, {3, 1}, {1, 0}});
  const CycleStats c = cycle_of(pi, 0);
  EXPECT_EQ(std::set<int>(c.elements.begin(), c.elements.end()), orbit_oracle(pi, 0));
  EXPECT_EQ(c.elements, (std::vector<int>{0, 3, 1}));
  EXPECT_EQ(c.min, 0);
  EXPECT_EQ(c.max, 3);
  EXPECT_EQ(c.diam, 3);
  EXPECT_EQ(c.length, 3);
}

TEST(CycleOf, DomainError) {
  try {
    cycle_of(Permutation::identity(2), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
  }
}

TEST(CycleOf, MatchesOracleAndPartitionsDomain) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + trial % 8;
    const Permutation pi = random_permutation(n, gen);
    int covered = 0;
    std::set<int> seen;
    for (int j = -n; j <= n; ++j) {
      const CycleStats c = cycle_of(pi, j);
      const std::set<int> expected = orbit_oracle(pi, j);
      ASSERT_EQ(std::set<int>(c.elements.begin(), c.elements.end()), expected);
      ASSERT_EQ(c.length, static_cast<int>(expected.size()));
      ASSERT_EQ(c.diam, *expected.rbegin() - *expected.begin());
      // The same cycle from any of its members.
      for (int k : c.elements) {
        const CycleStats other = cycle_of(pi, k);
        ASSERT_EQ(std::set<int>(other.elements.begin(), other.elements.end()), expected);
      }
      if (!seen.count(j)) {
        covered += c.length;
        seen.insert(c.elements.begin(), c.elements.end());
      }
    }
    ASSERT_EQ(covered, 2 * n + 1);
  }
}

TEST(Energy, Examples) {
  const ModelParams p1{Exponent(1.0), 1, 2};
  EXPECT_EQ(energy(Permutation::identity(2), p1), 0.0);
  EXPECT_DOUBLE_EQ(energy(from_pairs(2, {{0, 1}, {1, 0}}), p1), 2.0);
  const ModelParams p2{Exponent(2.0), 2, 2};
  EXPECT_DOUBLE_EQ(energy(from_pairs(2, {{0, 2}, {2, 0}}), p2), 2.0);
}

TEST(Energy, InfiniteExponentUnsupported) {
  try {
    energy(Permutation::identity(1), ModelParams{Exponent::infinity(), 1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unsupported_exponent);
  }
}

TEST(Energy, ZeroOnlyAtIdentityAndMatchesOracle) {
  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    for (int W : {1, 2, 3}) {
      const ModelParams params{Exponent(p), W, 2};
      for_each_permutation(params, [&](const Permutation& pi) {
        const double e = energy(pi, params);
        ASSERT_EQ(e == 0.0, pi.is_identity());
        ASSERT_NEAR(e, energy_oracle(pi, p, W), 1e-12 * std::max(1.0, e));
      });
    }
  }
}

TEST(Energy, ReflectionInvariant) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Permutation pi = random_permutation(1 + trial % 6, gen);
    const Permutation rho = reflect(pi);
    EXPECT_EQ(reflect(rho), pi);
    for (double p : {1.0, 2.5}) {
      const ModelParams params{Exponent(p), 2, pi.n()};
      EXPECT_NEAR(energy(pi, params), energy(rho, params), 1e-12);
    }
  }
}

TEST(Support, Examples) {
  const Permutation id = Permutation::identity(2);
  EXPECT_EQ(max_displacement(id), 0);
  for (int W = 1; W <= 4; ++W) EXPECT_TRUE(in_support(id, W));
  const Permutation far = from_pairs(2, {{0, 2}, {2, 0}});
  EXPECT_EQ(max_displacement(far), 2);
  EXPECT_FALSE(in_support(far, 1));
  EXPECT_TRUE(in_support(far, 2));
}

TEST(Support, MonotoneInBandwidth) {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 200; ++trial) {
    const Permutation pi = random_permutation(4, gen);
    for (int W = 1; W <= 8; ++W) {
      if (in_support(pi, W)) {
        for (int V = W; V <= 9; ++V) ASSERT_TRUE(in_support(pi, V));
      }
    }
  }
}

TEST(SwapImages, Example) {
  const Permutation rho = swap_images(Permutation::identity(2), 0, 1);
  EXPECT_EQ(rho, from_pairs(2, {{0, 1}, {1, 0}}));
}

TEST(SwapImages, EnergyAfterLongSwap) {
  const Permutation rho = swap_images(Permutation::identity(3), 0, 3);
  EXPECT_DOUBLE_EQ(energy(rho, ModelParams{Exponent(1.0), 1, 3}), 6.0);
  EXPECT_DOUBLE_EQ(energy_oracle(rho, 1.0, 1), 6.0);
}

TEST(SwapImages, Errors) {
  const Permutation id = Permutation::identity(2);
  try {
    swap_images(id, 1, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_swap);
  }
  try {
    swap_images(id, 0, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
  }
}

// Exhaustive on 2n+1 <= 7: bijectivity is preserved and the swap is an
// involution.
TEST(SwapImages, InvolutionExhaustive) {
  for (int n = 1; n <= 3; ++n) {
    for_each_permutation(ModelParams{Exponent(1.0), 1, n}, [&](const Permutation& pi) {
      for (int a = -n; a <= n; ++a) {
        for (int b = -n; b <= n; ++b) {
          if (a == b) continue;
          const Permutation rho = swap_images(pi, a, b);
          ASSERT_NO_THROW(Permutation::from_images({rho.images().begin(), rho.images().end()}));
          ASSERT_EQ(rho(a), pi(b));
          ASSERT_EQ(rho(b), pi(a));
          ASSERT_EQ(swap_images(rho, a, b), pi);
        }
      }
    });
  }
}

TEST(DisplacementCost, SwapDeltaMatchesFullEnergy) {
  std::mt19937_64 gen(3);
  for (double p : {1.0, 1.5, 2.0, 4.0}) {
    const ModelParams params{Exponent(p), 3, 6};
    const DisplacementCost cost(params);
    for (int trial = 0; trial < 200; ++trial) {
      const Permutation pi = random_permutation(6, gen);
      const int a = static_cast<int>(gen() % 13) - 6;
      const int b = (a + 1 + static_cast<int>(gen() % 12) + 6) % 13 - 6;
      if (a == b) continue;
      const double expected = energy(swap_images(pi, a, b), params) - energy(pi, params);
      ASSERT_NEAR(cost.swap_delta(pi, a, b), expected, 1e-9);
    }
  }
}

TEST(Exponent, Validation) {
  EXPECT_THROW(Exponent(0.5), Error);
  EXPECT_TRUE(Exponent::infinity().is_infinite());
  EXPECT_EQ(parse_exponent("inf"), Exponent::infinity());
  EXPECT_EQ(parse_exponent("1.5").value(), 1.5);
  EXPECT_THROW(parse_exponent("x"), Error);
}

TEST(Json, RoundTripRandomPermutations) {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 100; ++trial) {
    const Permutation pi = random_permutation(1 + trial % 10, gen);
    const std::string text = to_json(pi).dump();
    EXPECT_EQ(permutation_from_json(nlohmann::json::parse(text)), pi);
  }
  EXPECT_EQ(to_json(swap_images(Permutation::identity(1), 0, 1)).dump(), "[-1,1,0]");
  EXPECT_THROW(permutation_from_json(nlohmann::json::parse("[0,0,1]")), Error);
}

}  // namespace
