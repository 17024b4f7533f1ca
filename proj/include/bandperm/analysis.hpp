#pragma once

// Reductions from sample streams and oracles to the quantities the
// experiments report: survival curves of cycle diameters, exponential decay
// and power-law fits, the band-structure slope, preimage-size histograms, and
// the tail-bound recurrence checker.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "bandperm/core.hpp"
#include "bandperm/uncross.hpp"

namespace bandperm {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double rms_residual = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit least_squares(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorKind::domain, "least_squares: size mismatch");
  if (xs.size() < 2) throw Error(ErrorKind::unfittable, "least_squares needs >= 2 points");
  const double m = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  if (sxx == 0.0) throw Error(ErrorKind::unfittable, "least_squares: x values are all equal");
  LinearFit fit;
  fit.points = xs.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double r = ys[k] - (fit.intercept + fit.slope * xs[k]);
    rss += r * r;
  }
  fit.rms_residual = std::sqrt(rss / m);
  fit.r_squared = syy > 0.0 ? 1.0 - rss / syy : (rss == 0.0 ? 1.0 : 0.0);
  return fit;
}

/// Slope of log y against log x.
inline LinearFit fit_power_law(std::span<const double> xs, std::span<const double> ys) {
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (!(xs[k] > 0.0) || !(ys[k] > 0.0)) {
      throw Error(ErrorKind::unfittable, "power-law fit needs strictly positive values");
    }
    lx.push_back(std::log(xs[k]));
    ly.push_back(std::log(ys[k]));
  }
  return least_squares(lx, ly);
}

// ---------------------------------------------------------------------------
// Tail curves

struct MeanEstimate {
  double mean = 0.0;
  double error = 0.0;  // jackknife over contiguous blocks
};

/// Mean with a blocked jackknife error; blocks absorb chain autocorrelation.
inline MeanEstimate blocked_jackknife_mean(std::span<const double> values, int blocks = 20) {
  if (values.empty()) throw Error(ErrorKind::no_data, "no samples");
  MeanEstimate out;
  double total = 0.0;
  for (double v : values) total += v;
  out.mean = total / static_cast<double>(values.size());
  const auto b = static_cast<std::size_t>(
      std::min<std::size_t>(static_cast<std::size_t>(std::max(blocks, 2)), values.size()));
  if (b < 2) return out;
  const std::size_t per = values.size() / b;
  const std::size_t used = per * b;
  double used_total = 0.0;
  for (std::size_t k = 0; k < used; ++k) used_total += values[k];
  std::vector<double> loo(b);
  for (std::size_t k = 0; k < b; ++k) {
    double block = 0.0;
    for (std::size_t i = k * per; i < (k + 1) * per; ++i) block += values[i];
    loo[k] = (used_total - block) / static_cast<double>(used - per);
  }
  double mean_loo = 0.0;
  for (double v : loo) mean_loo += v;
  mean_loo /= static_cast<double>(b);
  double var = 0.0;
  for (double v : loo) var += (v - mean_loo) * (v - mean_loo);
  out.error = std::sqrt(var * static_cast<double>(b - 1) / static_cast<double>(b));
  return out;
}

struct TailPoint {
  int lambda = 0;
  double survival = 0.0;
  double stderr_ = 0.0;
  std::int64_t count = 0;
};

struct TailCurve {
  ModelParams params;
  int j = 0;
  std::vector<TailPoint> grid;
  MeanEstimate mean_diam;
};

/// Empirical P(diam >= lambda) over an ascending grid.
inline TailCurve estimate_tail_curve(std::span<const int> diams, std::vector<int> lambda_grid,
                                     const ModelParams& params, int j) {
  if (diams.empty()) throw Error(ErrorKind::no_data, "estimate_tail_curve: empty sample stream");
  if (lambda_grid.empty()) throw Error(ErrorKind::domain, "estimate_tail_curve: empty grid");
  std::sort(lambda_grid.begin(), lambda_grid.end());
  lambda_grid.erase(std::unique(lambda_grid.begin(), lambda_grid.end()), lambda_grid.end());

  const int top = *std::max_element(diams.begin(), diams.end());
  std::vector<std::int64_t> at_least(static_cast<std::size_t>(top) + 2, 0);
  for (int d : diams) ++at_least[static_cast<std::size_t>(d)];
  for (int d = top - 1; d >= 0; --d) {
    at_least[static_cast<std::size_t>(d)] += at_least[static_cast<std::size_t>(d) + 1];
  }

  TailCurve curve;
  curve.params = params;
  curve.j = j;
  const auto count = static_cast<std::int64_t>(diams.size());
  for (int lambda : lambda_grid) {
    TailPoint pt;
    pt.lambda = lambda;
    pt.count = count;
    const std::int64_t hits =
        lambda <= 0 ? count : (lambda > top ? 0 : at_least[static_cast<std::size_t>(lambda)]);
    pt.survival = static_cast<double>(hits) / static_cast<double>(count);
    pt.stderr_ = std::sqrt(pt.survival * (1.0 - pt.survival) / static_cast<double>(count));
    curve.grid.push_back(pt);
  }
  std::vector<double> as_real(diams.begin(), diams.end());
  curve.mean_diam = blocked_jackknife_mean(as_real);
  return curve;
}

/// Which curve points enter the decay fit. Points with lambda <= head_cutoff
/// (default 2W) or survival below min_count_factor / count are dropped.
struct FitWindow {
  std::optional<int> head_cutoff;
  double min_count_factor = 10.0;
};

struct DecayFit {
  int W = 1;
  /// Slope of -log survival against lambda.
  double rate = 0.0;
  /// rate * W^3, the constant in exp(-c lambda / W^3).
  double scaled_rate = 0.0;
  LinearFit fit;
  int lambda_lo = 0;
  int lambda_hi = 0;
};

inline DecayFit fit_decay(const TailCurve& curve, const FitWindow& window = {}) {
  const int head = window.head_cutoff.value_or(2 * curve.params.W);
  std::vector<double> xs, ys;
  DecayFit out;
  out.W = curve.params.W;
  for (const auto& pt : curve.grid) {
    if (pt.lambda <= head) continue;
    if (!(pt.survival > 0.0 && pt.survival < 1.0)) continue;
    if (pt.survival < window.min_count_factor / static_cast<double>(pt.count)) continue;
    if (xs.empty()) out.lambda_lo = pt.lambda;
    out.lambda_hi = pt.lambda;
    xs.push_back(pt.lambda);
    ys.push_back(-std::log(pt.survival));
  }
  if (xs.size() < 3) {
    throw Error(ErrorKind::unfittable,
                "decay fit needs >= 3 window points with survival in (0,1), got " +
                    std::to_string(xs.size()));
  }
  out.fit = least_squares(xs, ys);
  out.rate = out.fit.slope;
  out.scaled_rate = out.rate * std::pow(static_cast<double>(out.W), 3);
  return out;
}

/// The largest c with survival(lambda) <= 2 exp(-c lambda / W^3) at every
/// point of the decay-fit window.
struct TailEnvelope {
  double scaled_constant = 0.0;
  int lambda_lo = 0;
  int lambda_hi = 0;
  std::size_t points = 0;
};

inline bool envelope_holds(const TailCurve& curve, double scaled_constant, int lambda_lo,
                           int lambda_hi) {
  const double w3 = std::pow(static_cast<double>(curve.params.W), 3);
  for (const auto& pt : curve.grid) {
    if (pt.lambda < lambda_lo || pt.lambda > lambda_hi) continue;
    const double bound = 2.0 * std::exp(-scaled_constant * pt.lambda / w3);
    if (pt.survival > bound * (1.0 + 1e-12)) return false;
  }
  return true;
}

inline TailEnvelope fit_tail_envelope(const TailCurve& curve, const FitWindow& window = {}) {
  const DecayFit decay = fit_decay(curve, window);
  const double w3 = std::pow(static_cast<double>(curve.params.W), 3);
  TailEnvelope out;
  out.lambda_lo = decay.lambda_lo;
  out.lambda_hi = decay.lambda_hi;
  out.scaled_constant = std::numeric_limits<double>::infinity();
  for (const auto& pt : curve.grid) {
    if (pt.lambda < out.lambda_lo || pt.lambda > out.lambda_hi || pt.survival <= 0.0) continue;
    const double c = w3 * (std::log(2.0) - std::log(pt.survival)) / pt.lambda;
    out.scaled_constant = std::min(out.scaled_constant, c);
    ++out.points;
  }
  return out;
}

struct FitResult {
  std::vector<DecayFit> decay;
  /// Slope of log E[diam] against log W; NaN with fewer than two bandwidths.
  double exponent_alpha_hat = std::numeric_limits<double>::quiet_NaN();
  std::optional<LinearFit> exponent_fit;
};

inline FitResult fit_decay_and_exponent(std::span<const TailCurve> curves,
                                        const FitWindow& window = {}) {
  if (curves.empty()) throw Error(ErrorKind::no_data, "no tail curves to fit");
  FitResult out;
  std::map<int, std::pair<double, int>> by_w;  // W -> (sum of mean diam, curves)
  for (const auto& c : curves) {
    out.decay.push_back(fit_decay(c, window));
    auto& slot = by_w[c.params.W];
    slot.first += c.mean_diam.mean;
    slot.second += 1;
  }
  if (by_w.size() >= 2) {
    std::vector<double> ws, means;
    for (const auto& [w, acc] : by_w) {
      ws.push_back(w);
      means.push_back(acc.first / acc.second);
    }
    out.exponent_fit = fit_power_law(ws, means);
    out.exponent_alpha_hat = out.exponent_fit->slope;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Band structure

/// Mean |pi(i) - i| over |i| <= half_width.
inline double mean_abs_displacement(const Permutation& pi, int half_width) {
  half_width = std::min(half_width, pi.n());
  double total = 0.0;
  for (int i = -half_width; i <= half_width; ++i) total += std::abs(pi(i) - i);
  return total / static_cast<double>(2 * half_width + 1);
}

struct BandStructureFit {
  std::vector<int> W;
  std::vector<MeanEstimate> mean_displacement;
  LinearFit fit;  // log E|pi(0)| against log W
};

/// Regresses log of the mean displacement on log W. Each entry pairs a
/// bandwidth with its displacement samples.
inline BandStructureFit band_structure_stat(
    const std::vector<std::pair<int, std::vector<double>>>& samples) {
  if (samples.empty()) throw Error(ErrorKind::no_data, "band_structure_stat: no bandwidths");
  BandStructureFit out;
  std::vector<double> ws, means;
  for (const auto& [w, values] : samples) {
    const MeanEstimate est = blocked_jackknife_mean(values);
    if (!(est.mean > 0.0)) {
      throw Error(ErrorKind::unfittable,
                  "mean displacement is 0 at W = " + std::to_string(w) + "; log scale undefined");
    }
    out.W.push_back(w);
    out.mean_displacement.push_back(est);
    ws.push_back(w);
    means.push_back(est.mean);
  }
  out.fit = fit_power_law(ws, means);
  return out;
}

// ---------------------------------------------------------------------------
// Preimage sizes

struct PreimageHistogram {
  int W = 1;
  int t = 0;
  std::map<int, std::int64_t> counts;
  std::int64_t admissible = 0;
  std::int64_t skipped = 0;

  /// Smallest size s with P(size <= s) >= q.
  int quantile(double q) const {
    if (admissible == 0) throw Error(ErrorKind::no_data, "no admissible samples");
    const double target = q * static_cast<double>(admissible);
    std::int64_t seen = 0;
    for (const auto& [size, count] : counts) {
      seen += count;
      if (static_cast<double>(seen) >= target) return size;
    }
    return counts.rbegin()->first;
  }
  int max_size() const { return counts.empty() ? 0 : counts.rbegin()->first; }
};

/// Accumulates |uncross_preimage(tau, t)| over a stream of p = inf samples,
/// skipping tau whose cycle of 0 exceeds t.
class PreimageSizeAccumulator {
 public:
  PreimageSizeAccumulator(const ModelParams& params, int t) : params_(params) {
    if (params.p.is_finite()) {
      throw Error(ErrorKind::unsupported_exponent, "preimage size statistics need p = inf");
    }
    if (t < 0) throw Error(ErrorKind::domain, "threshold must be >= 0");
    hist_.W = params.W;
    hist_.t = t;
  }

  void add(const Permutation& tau) {
    if (max_of_cycle_at_zero(tau) > hist_.t) {
      ++hist_.skipped;
      return;
    }
    ++hist_.admissible;
    ++hist_.counts[static_cast<int>(uncross_preimage(tau, hist_.t, params_).size())];
  }

  const PreimageHistogram& finish() const {
    if (hist_.admissible == 0) throw Error(ErrorKind::no_data, "no admissible samples");
    return hist_;
  }

 private:
  ModelParams params_;
  PreimageHistogram hist_;
};

inline PreimageHistogram preimage_size_stats(const ModelParams& params, int t,
                                             std::span<const Permutation> taus) {
  PreimageSizeAccumulator acc(params, t);
  for (const auto& tau : taus) acc.add(tau);
  return acc.finish();
}

// ---------------------------------------------------------------------------
// Tail-bound recurrence
//
// With p_j = P(max C(0) > j) the one-step estimate reads
//   p_{k+1} <= C0 W^2 sum_{j<=k} w_j (p_j - p_{j+1}),  w_j = exp(-|k-j|^p / W^p).
// Summing by parts (w_{-1} = 0, w_k = 1) and moving the p_{k+1} term left:
//   p_{k+1} <= C0 W^2 / (1 + C0 W^2) * sum_{j<=k} p_j (w_j - w_{j-1}).
// The checker asks whether f(k) = min(1, 2 exp(-c0 k / W^3)) reproduces
// itself: assuming p_j <= f(j) for j <= k, is the right side <= f(k+1)?
// The weights w_j - w_{j-1} are nonnegative, so substituting f is monotone.

struct RecurrenceResult {
  bool propagated = true;
  std::optional<int> first_failure_k;
  /// max over k of bound(k) / f(k+1).
  double worst_ratio = 0.0;
};

/// The factor C0 W^2 / (1 + C0 W^2) = 1 - c W^-2 with c = 1 / (C0 + W^-2).
inline double recurrence_contraction(double C0, int W) {
  const double w2 = static_cast<double>(W) * W;
  return C0 * w2 / (1.0 + C0 * w2);
}

inline RecurrenceResult recurrence_check(double p, int W, double C0, double c0, int k_max) {
  if (!(p >= 1.0) || std::isinf(p)) throw Error(ErrorKind::domain, "recurrence needs finite p >= 1");
  if (W < 1) throw Error(ErrorKind::domain, "W must be >= 1");
  if (!(C0 > 0.0)) throw Error(ErrorKind::domain, "C0 must be > 0");
  if (!(c0 >= 0.0)) throw Error(ErrorKind::domain, "c0 must be >= 0");
  if (k_max < 1) throw Error(ErrorKind::domain, "k_max must be >= 1");

  const double w3 = std::pow(static_cast<double>(W), 3);
  const double wp = std::pow(static_cast<double>(W), p);
  std::vector<double> weight(static_cast<std::size_t>(k_max) + 2);  // w at distance d
  for (std::size_t d = 0; d < weight.size(); ++d) {
    weight[d] = std::exp(-std::pow(static_cast<double>(d), p) / wp);
  }
  std::vector<double> f(static_cast<std::size_t>(k_max) + 1);
  for (std::size_t k = 0; k < f.size(); ++k) {
    f[k] = std::min(1.0, 2.0 * std::exp(-c0 * static_cast<double>(k) / w3));
  }
  const double contraction = recurrence_contraction(C0, W);

  RecurrenceResult out;
  for (int k = 0; k < k_max; ++k) {
    const double target = f[static_cast<std::size_t>(k) + 1];
    double sum = 0.0;
    int d = 0;
    for (; d < k; ++d) {
      // j = k - d > 0
      sum += f[static_cast<std::size_t>(k - d)] * (weight[static_cast<std::size_t>(d)] -
                                                    weight[static_cast<std::size_t>(d) + 1]);
      // Remaining terms telescope to at most weight[d + 1] since f <= 1.
      if (weight[static_cast<std::size_t>(d) + 1] < 1e-16 * target) {
        sum += weight[static_cast<std::size_t>(d) + 1];
        break;
      }
    }
    if (d == k) sum += f[0] * weight[static_cast<std::size_t>(k)];  // j = 0, w_{-1} = 0
    const double bound = contraction * sum;
    const double ratio = bound / target;
    out.worst_ratio = std::max(out.worst_ratio, ratio);
    if (bound > target * (1.0 + 1e-12) && out.propagated) {
      out.propagated = false;
      out.first_failure_k = k;
    }
  }
  return out;
}

struct CriticalRate {
  /// Largest c0 found to propagate (0 when even the smallest probe fails).
  double c0 = 0.0;
  /// Smallest c0 found to fail, or +inf if none up to the search cap.
  double failing_c0 = std::numeric_limits<double>::infinity();
};

/// Bisection for the largest propagating c0, assuming propagation is
/// monotone in c0.
inline CriticalRate find_critical_c0(double p, int W, double C0, int k_max,
                                     double relative_tolerance = 1e-4) {
  CriticalRate out;
  double lo = 1e-6;
  if (!recurrence_check(p, W, C0, lo, k_max).propagated) {
    out.failing_c0 = lo;
    return out;
  }
  double hi = 1.0;
  while (recurrence_check(p, W, C0, hi, k_max).propagated) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) {
      out.c0 = lo;
      return out;
    }
  }
  while ((hi - lo) > relative_tolerance * hi) {
    const double mid = 0.5 * (lo + hi);
    if (recurrence_check(p, W, C0, mid, k_max).propagated) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.c0 = lo;
  out.failing_c0 = hi;
  return out;
}

}  // namespace bandperm
