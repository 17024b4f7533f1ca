#pragma once

// Run configuration and command dispatch behind the `bandperm` executable.
//
// A run is described by a JSON document plus flag overrides (flags win). The
// resolved configuration is echoed into every artifact as a manifest, and
// parsing that manifest's "config" object reproduces the run.

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bandperm/analysis.hpp"
#include "bandperm/core.hpp"
#include "bandperm/exact.hpp"
#include "bandperm/io.hpp"
#include "bandperm/sampler.hpp"
#include "bandperm/verify.hpp"

namespace bandperm::cli {

inline constexpr const char* kFormatVersion = "bandperm-artifacts/1";
inline constexpr const char* kOutputDirEnv = "BANDPERM_OUTPUT_DIR";
inline constexpr const char* kDefaultOutputDir = "bandperm-out";

enum class Command { exact, sample, tail, uncross_verify, sweep, recurrence };

inline std::string to_string(Command c) {
  switch (c) {
    case Command::exact: return "exact";
    case Command::sample: return "sample";
    case Command::tail: return "tail";
    case Command::uncross_verify: return "uncross-verify";
    case Command::sweep: return "sweep";
    case Command::recurrence: return "recurrence";
  }
  return "?";
}

inline Command parse_command(const std::string& s) {
  if (s == "exact") return Command::exact;
  if (s == "sample") return Command::sample;
  if (s == "tail") return Command::tail;
  if (s == "uncross-verify") return Command::uncross_verify;
  if (s == "sweep") return Command::sweep;
  if (s == "recurrence") return Command::recurrence;
  throw ConfigError("command", "unknown command '" + s + "'");
}

struct RunConfig {
  Command command = Command::sample;
  ModelParams params;
  int j = 0;

  std::uint64_t seed = 0;
  std::int64_t steps = 1'000'000;
  std::optional<std::int64_t> burn_in;   // default 10 (2n+1) W, clipped to steps / 2
  std::optional<std::int64_t> thinning;  // default 2n+1
  InitialState initial_state = InitialState::identity;
  bool verify_energy = false;

  std::optional<std::vector<int>> lambda_grid;  // default per (n, W)
  std::string output_dir = kDefaultOutputDir;

  // sweep / uncross-verify / recurrence
  std::vector<int> W_grid;
  std::vector<Exponent> p_list;
  std::vector<std::uint64_t> seeds;
  int n_scale = 0;  // sweep: n = n_scale * W when > 0
  int threads = 1;
  std::optional<int> preimage_t;  // sweep at p = inf: threshold of the preimage probe

  double C0 = 1.0;
  std::optional<double> c0;
  std::optional<int> k_max;  // default 50 W^3

  std::optional<int> head_cutoff;
  double min_count_factor = 10.0;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// {0, 1, ..., min(2n, 20 W^3)}, thinned to at most 64 points.
inline std::vector<int> default_lambda_grid(const ModelParams& params) {
  const long long cap = 20LL * params.W * params.W * params.W;
  const int top = static_cast<int>(std::min<long long>(2LL * params.n, cap));
  const int step = (top + 1 + 63) / 64;
  std::vector<int> grid;
  for (int l = 0; l <= top; l += step) grid.push_back(l);
  return grid;
}

inline SamplerConfig sampler_for(const RunConfig& cfg, const ModelParams& params,
                                 std::uint64_t seed, std::uint64_t stream = 0) {
  SamplerConfig s = default_sampler_config(params, cfg.steps, seed);
  s.stream = stream;
  if (cfg.burn_in) s.burn_in = *cfg.burn_in;
  if (cfg.thinning) s.thinning = *cfg.thinning;
  s.initial_state = cfg.initial_state;
  s.verify_energy = cfg.verify_energy;
  return s;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "command", "p", "W", "n", "j", "seed", "steps", "burn_in", "thinning", "initial_state",
      "verify_energy", "lambda_grid", "output_dir", "W_grid", "p_list", "seeds", "n_scale",
      "threads", "preimage_t", "C0", "c0", "k_max", "head_cutoff", "min_count_factor"};
  return keys;
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("list", "empty list element in '" + text + "'");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

/// Turns a flag string into the JSON value the document would hold.
inline nlohmann::json flag_to_json(const std::string& key, const std::string& text) {
  const auto as_integer = [&](const std::string& s) -> nlohmann::json {
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
      throw ConfigError(key, "expected an integer, got '" + s + "'");
    }
    return v;
  };
  const auto as_unsigned = [&](const std::string& s) -> nlohmann::json {
    unsigned long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
      throw ConfigError(key, "expected a nonnegative integer, got '" + s + "'");
    }
    return v;
  };
  const auto as_real = [&](const std::string& s) -> nlohmann::json {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
      throw ConfigError(key, "expected a number, got '" + s + "'");
    }
    return v;
  };
  const auto as_exponent = [&](const std::string& s) -> nlohmann::json {
    if (s == "inf" || s == "infinity" || s == "INFINITY" || s == "Inf") return "inf";
    return as_real(s);
  };

  if (key == "command" || key == "output_dir" || key == "initial_state") return text;
  if (key == "p") return as_exponent(text);
  if (key == "C0" || key == "c0" || key == "min_count_factor") return as_real(text);
  if (key == "seed") return as_unsigned(text);
  if (key == "verify_energy") {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError(key, "expected true or false, got '" + text + "'");
  }
  if (key == "lambda_grid" || key == "W_grid") {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : split_list(text)) arr.push_back(as_integer(s));
    return arr;
  }
  if (key == "seeds") {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : split_list(text)) arr.push_back(as_unsigned(s));
    return arr;
  }
  if (key == "p_list") {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : split_list(text)) arr.push_back(as_exponent(s));
    return arr;
  }
  return as_integer(text);
}

inline long long get_integer(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
  return v.get<long long>();
}

inline int get_int(const nlohmann::json& v, const std::string& key) {
  const long long x = get_integer(v, key);
  if (x < INT32_MIN || x > INT32_MAX) throw ConfigError(key, "integer out of range");
  return static_cast<int>(x);
}

inline std::uint64_t get_seed(const nlohmann::json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return v.get<std::uint64_t>();
  throw ConfigError(key, "expected a nonnegative integer");
}

inline double get_real(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

inline Exponent get_exponent(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity" || s == "INFINITY" || s == "Inf") return Exponent::infinity();
    throw ConfigError(key, "p must be >= 1 or \"inf\", got '" + s + "'");
  }
  if (!v.is_number()) throw ConfigError(key, "p must be >= 1 or \"inf\"");
  const double x = v.get<double>();
  if (!(x >= 1.0)) throw ConfigError(key, "p must be >= 1 or \"inf\", got " + format_real(x));
  return Exponent(x);
}

inline const nlohmann::json& get_array(const nlohmann::json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(key, "expected a list");
  if (v.empty()) throw ConfigError(key, "list must be nonempty");
  return v;
}

}  // namespace detail

inline std::optional<std::string> output_dir_from_environment() {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return std::string(env);
  return std::nullopt;
}

/// Merges `overrides` (flag name -> flag text) over `document`, fills
/// defaults, and validates. Output directory precedence: flag, document,
/// environment, built-in default.
inline RunConfig parse_config(const nlohmann::json& document,
                              const std::map<std::string, std::string>& overrides = {},
                              std::optional<std::string> env_output_dir =
                                  output_dir_from_environment()) {
  if (!document.is_null() && !document.is_object()) {
    throw ConfigError("<document>", "configuration must be a JSON object");
  }
  nlohmann::json merged = document.is_null() ? nlohmann::json::object() : document;
  const auto& known = detail::known_keys();
  for (const auto& [key, value] : merged.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(key, "unknown configuration key");
    }
  }
  for (const auto& [key, text] : overrides) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(key, "unknown configuration key");
    }
    merged[key] = detail::flag_to_json(key, text);
  }
  const auto has = [&](const char* key) {
    return merged.contains(key) && !merged[key].is_null();
  };

  RunConfig cfg;
  if (!has("command")) throw ConfigError("command", "missing");
  if (!merged["command"].is_string()) throw ConfigError("command", "expected a string");
  cfg.command = parse_command(merged["command"].get<std::string>());

  if (has("p")) cfg.params.p = detail::get_exponent(merged["p"], "p");
  if (has("W")) cfg.params.W = detail::get_int(merged["W"], "W");
  cfg.params.n = has("n") ? detail::get_int(merged["n"], "n") : 10;
  if (cfg.params.W < 1) throw ConfigError("W", "must be >= 1");
  if (cfg.params.n < 1) throw ConfigError("n", "must be >= 1");
  if (has("j")) cfg.j = detail::get_int(merged["j"], "j");
  if (!cfg.params.contains(cfg.j)) throw ConfigError("j", "must lie in [-n, n]");

  if (has("seed")) cfg.seed = detail::get_seed(merged["seed"], "seed");
  if (has("steps")) cfg.steps = detail::get_integer(merged["steps"], "steps");
  if (cfg.steps < 0) throw ConfigError("steps", "must be >= 0");
  if (has("burn_in")) {
    cfg.burn_in = detail::get_integer(merged["burn_in"], "burn_in");
    if (*cfg.burn_in < 0) throw ConfigError("burn_in", "must be >= 0");
    if (*cfg.burn_in > cfg.steps) throw ConfigError("burn_in", "must not exceed steps");
  }
  if (has("thinning")) {
    cfg.thinning = detail::get_integer(merged["thinning"], "thinning");
    if (*cfg.thinning < 1) throw ConfigError("thinning", "must be >= 1");
  }
  if (has("initial_state")) {
    if (!merged["initial_state"].is_string()) throw ConfigError("initial_state", "expected a string");
    const auto s = merged["initial_state"].get<std::string>();
    if (s == "identity") {
      cfg.initial_state = InitialState::identity;
    } else if (s == "random_in_support") {
      cfg.initial_state = InitialState::random_in_support;
    } else {
      throw ConfigError("initial_state", "expected identity or random_in_support");
    }
  }
  if (has("verify_energy")) {
    if (!merged["verify_energy"].is_boolean()) throw ConfigError("verify_energy", "expected a boolean");
    cfg.verify_energy = merged["verify_energy"].get<bool>();
  }

  if (has("lambda_grid")) {
    std::vector<int> grid;
    for (const auto& v : detail::get_array(merged["lambda_grid"], "lambda_grid")) {
      const int l = detail::get_int(v, "lambda_grid");
      if (l < 0) throw ConfigError("lambda_grid", "entries must be >= 0");
      grid.push_back(l);
    }
    cfg.lambda_grid = grid;
  }

  if (has("output_dir")) {
    if (!merged["output_dir"].is_string()) throw ConfigError("output_dir", "expected a string");
    cfg.output_dir = merged["output_dir"].get<std::string>();
  } else if (env_output_dir) {
    cfg.output_dir = *env_output_dir;
  }
  if (cfg.output_dir.empty()) throw ConfigError("output_dir", "must be nonempty");

  if (has("W_grid")) {
    for (const auto& v : detail::get_array(merged["W_grid"], "W_grid")) {
      const int w = detail::get_int(v, "W_grid");
      if (w < 1) throw ConfigError("W_grid", "entries must be >= 1");
      cfg.W_grid.push_back(w);
    }
  } else {
    cfg.W_grid = {cfg.params.W};
  }
  if (has("p_list")) {
    for (const auto& v : detail::get_array(merged["p_list"], "p_list")) {
      cfg.p_list.push_back(detail::get_exponent(v, "p_list"));
    }
  } else {
    cfg.p_list = {cfg.params.p};
  }
  if (has("seeds")) {
    for (const auto& v : detail::get_array(merged["seeds"], "seeds")) {
      cfg.seeds.push_back(detail::get_seed(v, "seeds"));
    }
  } else {
    cfg.seeds = {cfg.seed};
  }
  if (has("n_scale")) {
    cfg.n_scale = detail::get_int(merged["n_scale"], "n_scale");
    if (cfg.n_scale < 0) throw ConfigError("n_scale", "must be >= 0");
  }
  if (has("threads")) {
    cfg.threads = detail::get_int(merged["threads"], "threads");
    if (cfg.threads < 1) throw ConfigError("threads", "must be >= 1");
  }
  if (has("preimage_t")) {
    cfg.preimage_t = detail::get_int(merged["preimage_t"], "preimage_t");
    if (*cfg.preimage_t < 0) throw ConfigError("preimage_t", "must be >= 0");
  }
  if (has("C0")) {
    cfg.C0 = detail::get_real(merged["C0"], "C0");
    if (!(cfg.C0 > 0.0)) throw ConfigError("C0", "must be > 0");
  }
  if (has("c0")) {
    cfg.c0 = detail::get_real(merged["c0"], "c0");
    if (!(*cfg.c0 >= 0.0)) throw ConfigError("c0", "must be >= 0");
  }
  if (has("k_max")) {
    cfg.k_max = detail::get_int(merged["k_max"], "k_max");
    if (*cfg.k_max < 1) throw ConfigError("k_max", "must be >= 1");
  }
  if (has("head_cutoff")) cfg.head_cutoff = detail::get_int(merged["head_cutoff"], "head_cutoff");
  if (has("min_count_factor")) {
    cfg.min_count_factor = detail::get_real(merged["min_count_factor"], "min_count_factor");
    if (!(cfg.min_count_factor >= 0.0)) throw ConfigError("min_count_factor", "must be >= 0");
  }

  // Single-model commands resolve their per-model defaults now so the
  // manifest shows exactly what ran.
  if (cfg.command == Command::exact || cfg.command == Command::sample ||
      cfg.command == Command::tail) {
    if (!cfg.lambda_grid) cfg.lambda_grid = default_lambda_grid(cfg.params);
    const SamplerConfig s = sampler_for(cfg, cfg.params, cfg.seed);
    cfg.burn_in = s.burn_in;
    cfg.thinning = s.thinning;
  }
  if (cfg.command == Command::recurrence) {
    for (const auto& p : cfg.p_list) {
      if (p.is_infinite()) throw ConfigError("p", "recurrence needs finite p");
    }
  }
  return cfg;
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
  const auto opt = [](const auto& o) -> nlohmann::json {
    if (o) return *o;
    return nullptr;
  };
  nlohmann::json p_list = nlohmann::json::array();
  for (const auto& p : cfg.p_list) p_list.push_back(exponent_to_json(p));
  return {{"command", to_string(cfg.command)},
          {"p", exponent_to_json(cfg.params.p)},
          {"W", cfg.params.W},
          {"n", cfg.params.n},
          {"j", cfg.j},
          {"seed", cfg.seed},
          {"steps", cfg.steps},
          {"burn_in", opt(cfg.burn_in)},
          {"thinning", opt(cfg.thinning)},
          {"initial_state",
           cfg.initial_state == InitialState::identity ? "identity" : "random_in_support"},
          {"verify_energy", cfg.verify_energy},
          {"lambda_grid", opt(cfg.lambda_grid)},
          {"output_dir", cfg.output_dir},
          {"W_grid", cfg.W_grid},
          {"p_list", p_list},
          {"seeds", cfg.seeds},
          {"n_scale", cfg.n_scale},
          {"threads", cfg.threads},
          {"preimage_t", opt(cfg.preimage_t)},
          {"C0", cfg.C0},
          {"c0", opt(cfg.c0)},
          {"k_max", opt(cfg.k_max)},
          {"head_cutoff", opt(cfg.head_cutoff)},
          {"min_count_factor", cfg.min_count_factor}};
}

inline nlohmann::json manifest(const RunConfig& cfg) {
  return {{"format_version", kFormatVersion}, {"config", config_to_json(cfg)}};
}

// ---------------------------------------------------------------------------
// Artifact writing

namespace detail {

inline std::string tag(const ModelParams& params, std::uint64_t seed) {
  return "p" + format_exponent(params.p) + "_W" + std::to_string(params.W) + "_n" +
         std::to_string(params.n) + "_seed" + std::to_string(seed);
}

inline std::string tag(const ModelParams& params) {
  return "p" + format_exponent(params.p) + "_W" + std::to_string(params.W) + "_n" +
         std::to_string(params.n);
}

class ArtifactWriter {
 public:
  explicit ArtifactWriter(const RunConfig& cfg)
      : dir_(cfg.output_dir), manifest_(manifest(cfg)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("output_dir", "cannot create '" + dir_.string() + "': " + ec.message());
    write_json("manifest.json", manifest_);
  }

  std::filesystem::path path(const std::string& name) const { return dir_ / name; }

  void write_json(const std::string& name, nlohmann::json body) const {
    if (name != "manifest.json") body["manifest"] = manifest_;
    write_text(name, body.dump(2) + "\n");
  }

  /// CSV whose first line is the manifest as a comment.
  std::ofstream open_csv(const std::string& name, const std::string& header) const {
    std::ofstream out(path(name), std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("output_dir", "cannot write '" + path(name).string() + "'");
    out << "# manifest: " << manifest_.dump() << "\n" << header << "\n";
    return out;
  }

  void write_text(const std::string& name, const std::string& text) const {
    std::ofstream out(path(name), std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("output_dir", "cannot write '" + path(name).string() + "'");
    out << text;
  }

 private:
  std::filesystem::path dir_;
  nlohmann::json manifest_;
};

inline nlohmann::json linear_fit_json(const LinearFit& f) {
  return {{"slope", f.slope},
          {"intercept", f.intercept},
          {"r_squared", f.r_squared},
          {"rms_residual", f.rms_residual},
          {"points", f.points}};
}

inline nlohmann::json decay_json(const TailCurve& curve, const FitWindow& window) {
  try {
    const DecayFit d = fit_decay(curve, window);
    const TailEnvelope env = fit_tail_envelope(curve, window);
    return {{"rate", d.rate},
            {"scaled_rate", d.scaled_rate},
            {"fit", linear_fit_json(d.fit)},
            {"window", {d.lambda_lo, d.lambda_hi}},
            {"envelope_scaled_constant", env.scaled_constant}};
  } catch (const Error& e) {
    return {{"error", std::string(to_string(e.kind()))}, {"message", e.what()}};
  }
}

inline void write_tail_csv(const ArtifactWriter& w, const std::string& name,
                           const TailCurve& curve) {
  auto out = w.open_csv(name, "lambda,survival,stderr,count");
  for (const auto& pt : curve.grid) {
    out << pt.lambda << ',' << format_real(pt.survival) << ',' << format_real(pt.stderr_) << ','
        << pt.count << '\n';
  }
}

inline FitWindow fit_window(const RunConfig& cfg) {
  FitWindow window;
  window.head_cutoff = cfg.head_cutoff;
  window.min_count_factor = cfg.min_count_factor;
  return window;
}

inline nlohmann::json summary_json(const ChainSummary& s) {
  return {{"retained_samples", s.retained_samples},
          {"accepted", s.accepted},
          {"acceptance_rate", s.acceptance_rate},
          {"final_state", to_json(s.final_state)}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

namespace detail {

inline int run_exact(const RunConfig& cfg, const ArtifactWriter& w) {
  const ExactDistribution dist = exact_distribution(cfg.params);
  const auto tail = exact_tail_curve(dist, cfg.j, *cfg.lambda_grid);
  const std::string base = "exact_" + tag(cfg.params) + "_j" + std::to_string(cfg.j);
  {
    auto out = w.open_csv(base + ".csv", "lambda,tail_probability");
    for (std::size_t k = 0; k < tail.size(); ++k) {
      out << (*cfg.lambda_grid)[k] << ',' << format_real(tail[k]) << '\n';
    }
  }
  w.write_json(base + ".json", {{"partition_value", dist.partition_value},
                                {"support_size", dist.support_size()},
                                {"params", to_json(cfg.params)},
                                {"j", cfg.j}});
  return 0;
}

inline int run_sample(const RunConfig& cfg, const ArtifactWriter& w) {
  const SamplerConfig s = sampler_for(cfg, cfg.params, cfg.seed);
  const std::string base = "sample_" + tag(cfg.params, cfg.seed);
  auto out = w.open_csv(base + ".csv", "step_index,diam,displacement0,maxC0,minC0");
  const ChainSummary summary = sample_cycle_observables(cfg.params, s, cfg.j, [&](const CycleRecord& r) {
    out << r.step << ',' << r.diam << ',' << r.displacement0 << ',' << r.max_c0 << ',' << r.min_c0
        << '\n';
  });
  out.close();
  w.write_json(base + ".json", summary_json(summary));
  return 0;
}

struct TailRun {
  TailCurve curve;
  ChainSummary summary;
  std::vector<double> displacement0;
  std::vector<double> bulk_displacement;
  std::optional<PreimageHistogram> preimages;
};

inline TailRun tail_run(const RunConfig& cfg, const ModelParams& params, std::uint64_t seed,
                        std::uint64_t stream, bool with_preimages) {
  const SamplerConfig s = sampler_for(cfg, params, seed, stream);
  const std::vector<int> grid = cfg.lambda_grid.value_or(default_lambda_grid(params));
  const int bulk = std::max(0, params.n - 10 * params.W);
  std::optional<PreimageSizeAccumulator> pre;
  if (with_preimages) pre.emplace(params, cfg.preimage_t.value_or(2 * params.W));

  TailRun run;
  std::vector<int> diams;
  run.summary = run_chain(params, s, [&](const Permutation& pi, std::int64_t step) {
    const CycleRecord rec = observe_cycles(pi, cfg.j, step);
    diams.push_back(rec.diam);
    run.displacement0.push_back(rec.displacement0);
    run.bulk_displacement.push_back(mean_abs_displacement(pi, bulk));
    if (pre) pre->add(pi);
  });
  run.curve = estimate_tail_curve(diams, grid, params, cfg.j);
  if (pre) {
    try {
      run.preimages = pre->finish();
    } catch (const Error&) {
      // no admissible samples; reported as absent
    }
  }
  return run;
}

inline nlohmann::json tail_json(const RunConfig& cfg, const TailRun& run) {
  nlohmann::json out = {{"params", to_json(run.curve.params)},
                        {"j", run.curve.j},
                        {"chain", summary_json(run.summary)},
                        {"mean_diam", run.curve.mean_diam.mean},
                        {"mean_diam_error", run.curve.mean_diam.error},
                        {"decay", decay_json(run.curve, fit_window(cfg))}};
  if (!run.displacement0.empty()) {
    const MeanEstimate d0 = blocked_jackknife_mean(run.displacement0);
    const MeanEstimate db = blocked_jackknife_mean(run.bulk_displacement);
    out["mean_displacement0"] = d0.mean;
    out["mean_displacement0_error"] = d0.error;
    out["mean_bulk_displacement"] = db.mean;
    out["mean_bulk_displacement_error"] = db.error;
  }
  if (run.preimages) {
    const auto& h = *run.preimages;
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [size, count] : h.counts) hist[std::to_string(size)] = count;
    out["preimage_sizes"] = {{"t", h.t},
                             {"admissible", h.admissible},
                             {"skipped", h.skipped},
                             {"histogram", hist},
                             {"median", h.quantile(0.5)},
                             {"q90", h.quantile(0.9)},
                             {"max", h.max_size()},
                             {"W", h.W},
                             {"W_squared", h.W * h.W}};
  }
  return out;
}

inline int run_tail(const RunConfig& cfg, const ArtifactWriter& w) {
  const TailRun run = tail_run(cfg, cfg.params, cfg.seed, 0, false);
  const std::string base = "tail_" + tag(cfg.params, cfg.seed);
  write_tail_csv(w, base + ".csv", run.curve);
  w.write_json(base + ".json", tail_json(cfg, run));
  return 0;
}

inline int run_sweep(const RunConfig& cfg, const ArtifactWriter& w) {
  struct Job {
    ModelParams params;
    std::uint64_t seed;
    std::uint64_t stream;
  };
  std::vector<Job> jobs;
  for (const auto& p : cfg.p_list) {
    for (int W : cfg.W_grid) {
      const int n = cfg.n_scale > 0 ? cfg.n_scale * W : cfg.params.n;
      std::uint64_t stream = 0;
      for (std::uint64_t seed : cfg.seeds) jobs.push_back({ModelParams{p, W, n}, seed, stream++});
    }
  }
  std::vector<std::optional<TailRun>> results(jobs.size());
  std::vector<std::string> failures(jobs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      try {
        const Job& job = jobs[k];
        results[k] = tail_run(cfg, job.params, job.seed, job.stream, job.params.p.is_infinite());
        write_tail_csv(w, "tail_" + tag(job.params, job.seed) + ".csv", results[k]->curve);
      } catch (const std::exception& e) {
        failures[k] = e.what();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(cfg.threads, static_cast<int>(jobs.size())));
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
  }

  nlohmann::json job_list = nlohmann::json::array();
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    if (!results[k]) {
      job_list.push_back({{"params", to_json(jobs[k].params)},
                          {"seed", jobs[k].seed},
                          {"error", failures[k]}});
      continue;
    }
    nlohmann::json entry = tail_json(cfg, *results[k]);
    entry["seed"] = jobs[k].seed;
    entry["stream"] = jobs[k].stream;
    entry["file"] = "tail_" + tag(jobs[k].params, jobs[k].seed) + ".csv";
    entry["lambda_grid"] = cfg.lambda_grid.value_or(default_lambda_grid(jobs[k].params));
    job_list.push_back(entry);
  }

  // Per exponent: scaling of E[diam] with W, and the band-structure slope.
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& p : cfg.p_list) {
    std::vector<TailCurve> curves;
    std::map<int, std::vector<double>> displacement;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      if (!(jobs[k].params.p == p) || !results[k]) continue;
      curves.push_back(results[k]->curve);
      auto& d = displacement[jobs[k].params.W];
      d.insert(d.end(), results[k]->bulk_displacement.begin(), results[k]->bulk_displacement.end());
    }
    nlohmann::json entry = {{"p", exponent_to_json(p)}};
    std::vector<double> ws, means;
    for (const auto& c : curves) {
      ws.push_back(c.params.W);
      means.push_back(c.mean_diam.mean);
    }
    try {
      const LinearFit alpha = fit_power_law(ws, means);
      entry["exponent_alpha_hat"] = alpha.slope;
      entry["exponent_fit"] = linear_fit_json(alpha);
    } catch (const Error& e) {
      entry["exponent_fit"] = {{"error", std::string(to_string(e.kind()))}, {"message", e.what()}};
    }
    if (p.is_finite() && p.value() == 1.0) {
      try {
        const BandStructureFit band = band_structure_stat({displacement.begin(), displacement.end()});
        entry["band_structure_slope"] = band.fit.slope;
        entry["band_structure_fit"] = linear_fit_json(band.fit);
      } catch (const Error& e) {
        entry["band_structure_fit"] = {{"error", std::string(to_string(e.kind()))},
                                       {"message", e.what()}};
      }
    }
    fits.push_back(entry);
  }
  w.write_json("sweep_summary.json", {{"jobs", job_list}, {"fits", fits}});
  for (const auto& f : failures) {
    if (!f.empty()) throw Error(ErrorKind::no_data, "sweep job failed: " + f);
  }
  return 0;
}

inline int run_uncross_verify(const RunConfig& cfg, const ArtifactWriter& w) {
  const UncrossCertificate cert = verify_uncrossing(cfg.params.n, cfg.params.W, cfg.p_list);
  w.write_json("uncross_certificate_W" + std::to_string(cfg.params.W) + "_n" +
                   std::to_string(cfg.params.n) + ".json",
               cert.to_json());
  return cert.violations() == 0 ? 0 : 4;
}

inline int run_recurrence(const RunConfig& cfg, const ArtifactWriter& w) {
  nlohmann::json rows = nlohmann::json::array();
  auto csv = w.open_csv("recurrence.csv", "p,W,k_max,c0_star,c0_star_W3");
  bool all_ok = true;
  for (const auto& p : cfg.p_list) {
    for (int W : cfg.W_grid) {
      const int k_max = cfg.k_max.value_or(50 * W * W * W);
      const CriticalRate crit = find_critical_c0(p.value(), W, cfg.C0, k_max);
      const double w3 = std::pow(static_cast<double>(W), 3);
      nlohmann::json row = {{"p", exponent_to_json(p)},
                            {"W", W},
                            {"C0", cfg.C0},
                            {"k_max", k_max},
                            {"contraction", recurrence_contraction(cfg.C0, W)},
                            {"c0_star", crit.c0},
                            {"c0_star_W3", crit.c0 * w3},
                            {"smallest_failing_c0", crit.failing_c0}};
      all_ok = all_ok && crit.c0 > 0.0;
      if (cfg.c0) {
        const RecurrenceResult r = recurrence_check(p.value(), W, cfg.C0, *cfg.c0, k_max);
        row["requested_c0"] = {{"c0", *cfg.c0},
                               {"propagated", r.propagated},
                               {"first_failure_k", r.first_failure_k ? nlohmann::json(*r.first_failure_k)
                                                                     : nlohmann::json(nullptr)},
                               {"worst_ratio", r.worst_ratio}};
      }
      csv << format_exponent(p) << ',' << W << ',' << k_max << ',' << format_real(crit.c0) << ','
          << format_real(crit.c0 * w3) << '\n';
      rows.push_back(row);
    }
  }
  csv.close();
  w.write_json("recurrence.json", {{"rows", rows}, {"all_propagating", all_ok}});
  return 0;
}

}  // namespace detail

/// Runs the command and returns the process exit status.
inline int run(const RunConfig& cfg) {
  const detail::ArtifactWriter writer(cfg);
  switch (cfg.command) {
    case Command::exact: return detail::run_exact(cfg, writer);
    case Command::sample: return detail::run_sample(cfg, writer);
    case Command::tail: return detail::run_tail(cfg, writer);
    case Command::uncross_verify: return detail::run_uncross_verify(cfg, writer);
    case Command::sweep: return detail::run_sweep(cfg, writer);
    case Command::recurrence: return detail::run_recurrence(cfg, writer);
  }
  return 1;
}

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::capacity: return 3;
    case ErrorKind::verification: return 4;
    default: return 1;
  }
}

inline nlohmann::json error_json(ErrorKind kind, const std::string& message) {
  return {{"error", std::string(to_string(kind))}, {"message", message},
          {"exit_code", exit_code(kind)}};
}

}  // namespace bandperm::cli
