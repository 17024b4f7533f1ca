#pragma once

// Exhaustive checks of the uncrossing map on small intervals. Every check
// walks the full enumeration of admissible permutations; preimages are
// compared against an inversion of the map built from that enumeration,
// independent of the candidate-pair search in uncross_preimage.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "bandperm/core.hpp"
#include "bandperm/exact.hpp"
#include "bandperm/io.hpp"
#include "bandperm/uncross.hpp"

namespace bandperm {

struct CheckTally {
  std::int64_t checked = 0;
  std::int64_t violations = 0;
  nlohmann::json first_violation;  // null when clean

  void record(bool ok, const nlohmann::json& witness) {
    ++checked;
    if (ok) return;
    if (violations == 0) first_violation = witness;
    ++violations;
  }

  nlohmann::json to_json() const {
    return {{"checked", checked}, {"violations", violations}, {"first_violation", first_violation}};
  }
};

struct UncrossReport {
  ModelParams params;

  // p = inf
  CheckTally image_membership;
  CheckTally preimage_bound;
  /// Membership failures when the transposition is applied on the other side
  /// (exchanging the images of u and v). Expected to be nonzero; not counted
  /// as a violation.
  std::int64_t alternative_reading_failures = 0;

  // every p
  CheckTally preimage_exactness;
  int max_preimage_size = 0;
  nlohmann::json max_preimage_witness;
  std::map<int, std::int64_t> preimage_size_histogram;

  // finite p
  CheckTally energy_monotonicity;
  CheckTally crossing_ratio;
  double max_ratio_over_bound = 0.0;
  nlohmann::json max_ratio_witness;
  /// max over tau of (sum_pre P(pi)/P(tau)) / (W^2 exp(-|t - max C_tau(0)|^p / W^p)).
  double max_ratio_sum_constant = 0.0;
  nlohmann::json max_ratio_sum_witness;

  std::int64_t violations() const {
    return image_membership.violations + preimage_bound.violations +
           preimage_exactness.violations + energy_monotonicity.violations +
           crossing_ratio.violations;
  }

  nlohmann::json to_json() const {
    nlohmann::json out = {{"p", exponent_to_json(params.p)},
                          {"W", params.W},
                          {"n", params.n},
                          {"violations", violations()},
                          {"preimage_exactness", preimage_exactness.to_json()},
                          {"max_preimage_size", max_preimage_size},
                          {"max_preimage_witness", max_preimage_witness}};
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [size, count] : preimage_size_histogram) hist[std::to_string(size)] = count;
    out["preimage_size_histogram"] = hist;
    if (params.p.is_infinite()) {
      out["image_membership"] = image_membership.to_json();
      out["preimage_bound"] = preimage_bound.to_json();
      out["alternative_reading_failures"] = alternative_reading_failures;
    } else {
      out["energy_monotonicity"] = energy_monotonicity.to_json();
      out["crossing_ratio"] = crossing_ratio.to_json();
      out["max_ratio_over_bound"] = max_ratio_over_bound;
      out["max_ratio_witness"] = max_ratio_witness;
      out["max_ratio_sum_constant"] = max_ratio_sum_constant;
      out["max_ratio_sum_witness"] = max_ratio_sum_witness;
    }
    return out;
  }
};

namespace detail {

inline nlohmann::json witness(const Permutation& pi, int t) {
  return {{"permutation", to_json(pi)}, {"t", t}};
}

inline bool in_event_band(const Permutation& rho, int W, int lower, int upper) {
  const int top = max_of_cycle_at_zero(rho);
  return in_support(rho, W) && top <= upper && top > lower;
}

}  // namespace detail

inline UncrossReport verify_uncrossing(const ModelParams& params) {
  params.validate();
  const std::vector<Permutation> all = enumerate_permutations(params);
  const int n = params.n;
  const int W = params.W;
  const bool hard = params.p.is_infinite();

  UncrossReport report;
  report.params = params;

  // Image membership at threshold lambda + 2W.
  if (hard) {
    for (int lambda = 0; lambda <= 2 * n; ++lambda) {
      const int t = lambda + 2 * W;
      for (const auto& pi : all) {
        if (max_of_cycle_at_zero(pi) <= t) continue;
        const Permutation rho = uncross(pi, t);
        report.image_membership.record(detail::in_event_band(rho, W, lambda, t),
                                       detail::witness(pi, t));
        const auto rec = *crossing_record(pi, t);
        if (!detail::in_event_band(swap_images(pi, rec.u, rec.v), W, lambda, t)) {
          ++report.alternative_reading_failures;
        }
      }
    }
  }

  // Preimages against the enumerated inversion, for every threshold.
  for (int t = 0; t <= 2 * n; ++t) {
    std::map<Permutation, std::vector<Permutation>> inverse;
    for (const auto& pi : all) {
      if (max_of_cycle_at_zero(pi) <= t) continue;
      inverse[uncross(pi, t)].push_back(pi);
    }
    for (const auto& tau : all) {
      const int top = max_of_cycle_at_zero(tau);
      if (top > t) continue;
      const auto found = uncross_preimage(tau, t, params);
      auto it = inverse.find(tau);
      std::vector<Permutation> expected = it == inverse.end() ? std::vector<Permutation>{}
                                                              : it->second;
      std::sort(expected.begin(), expected.end());
      report.preimage_exactness.record(found == expected, detail::witness(tau, t));

      const int size = static_cast<int>(found.size());
      ++report.preimage_size_histogram[size];
      if (size > report.max_preimage_size) {
        report.max_preimage_size = size;
        report.max_preimage_witness = detail::witness(tau, t);
      }
      if (hard) {
        report.preimage_bound.record(size <= W * W, detail::witness(tau, t));
      } else if (!found.empty()) {
        const double p = params.p.value();
        const double base = energy(tau, params);
        double sum = 0.0;
        for (const auto& pi : found) sum += std::exp(base - energy(pi, params));
        const double gap = std::pow(static_cast<double>(t - top), p) /
                           std::pow(static_cast<double>(W), p);
        const double constant = sum / (static_cast<double>(W) * W * std::exp(-gap));
        if (constant > report.max_ratio_sum_constant) {
          report.max_ratio_sum_constant = constant;
          report.max_ratio_sum_witness = detail::witness(tau, t);
        }
      }
    }
  }

  if (!hard) {
    for (int t = 0; t < n; ++t) {
      for (const auto& pi : all) {
        if (max_of_cycle_at_zero(pi) <= t) continue;
        const double before = energy(pi, params);
        const double after = energy(uncross(pi, t), params);
        report.energy_monotonicity.record(after <= before + 1e-12 * std::max(1.0, before),
                                          detail::witness(pi, t));
      }
      for (const auto& tau : all) {
        for (int a = -n; a <= t; ++a) {
          if (tau(a) > t) continue;
          for (int b = t + 1; b <= n; ++b) {
            if (tau(b) <= t) continue;
            const RatioCheck check = crossing_ratio_check(tau, a, b, t, params);
            nlohmann::json w = detail::witness(tau, t);
            w["a"] = a;
            w["b"] = b;
            report.crossing_ratio.record(check.satisfied, w);
            const double quotient = check.ratio / check.bound;
            if (quotient > report.max_ratio_over_bound) {
              report.max_ratio_over_bound = quotient;
              report.max_ratio_witness = w;
            }
          }
        }
      }
    }
  }
  return report;
}

struct UncrossCertificate {
  std::vector<UncrossReport> runs;

  std::int64_t violations() const {
    std::int64_t total = 0;
    for (const auto& r : runs) total += r.violations();
    return total;
  }

  nlohmann::json to_json() const {
    nlohmann::json out = {{"violations", violations()}, {"runs", nlohmann::json::array()}};
    for (const auto& r : runs) out["runs"].push_back(r.to_json());
    return out;
  }
};

inline UncrossCertificate verify_uncrossing(int n, int W, const std::vector<Exponent>& p_list) {
  UncrossCertificate cert;
  for (const auto& p : p_list) cert.runs.push_back(verify_uncrossing(ModelParams{p, W, n}));
  return cert;
}

}  // namespace bandperm
