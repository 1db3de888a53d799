#pragma once

// Shared plumbing for the CLI: synthetic corpus names, benchmark tasks and
// the float32 round trip every file-based run goes through.

#include <chrono>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "hbe/config.hpp"
#include "hbe/degradation.hpp"
#include "hbe/io.hpp"
#include "hbe/metrics.hpp"
#include "hbe/solver.hpp"
#include "hbe/synthetic.hpp"

namespace hbe::tools {

inline const std::vector<std::string>& synthetic_names() {
  static const std::vector<std::string> names{"stripes", "checkerboard", "weave",     "edges",
                                              "bandlimited", "filtered-noise", "hdr-scene"};
  return names;
}

inline bool is_synthetic(const std::string& name) {
  for (const auto& n : synthetic_names())
    if (n == name) return true;
  return false;
}

/// Generator parameters are fixed per name; `seed` only moves the random
/// scenes (edges, bandlimited, filtered-noise).
inline ImageGrid synthesize(const std::string& name, int w, int h, std::uint64_t seed) {
  if (w < 1 || h < 1) throw ArgumentError("synth: size must be positive");
  if (name == "stripes") return synthetic::stripes(w, h, 7.0, 0.4);
  if (name == "checkerboard") return synthetic::checkerboard(w, h, 6);
  if (name == "weave") return synthetic::weave(w, h, 8.0, 0.3);
  if (name == "edges") return synthetic::edges(w, h, seed);
  if (name == "bandlimited") return synthetic::bandlimited(w, h, seed);
  if (name == "filtered-noise") return synthetic::filtered_noise(w, h, seed);
  if (name == "hdr-scene") return synthetic::hdr_scene(w, h);
  throw ArgumentError("synth: unknown generator '" + name + "'");
}

struct BenchTask {
  std::string name;    // interpolate | denoise | zoom
  std::string params;  // e.g. "mask=random:0.7 noise=none"
  std::string mask = "none";
  std::string noise = "none";
  std::string preset = "interpolation";
};

/// "interp:<missing>", "denoise:<variance>" or "zoom:<factor>".
inline BenchTask parse_task(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (arg.empty()) throw ArgumentError("bench task '" + spec + "' needs an argument");
  BenchTask t;
  if (kind == "interp") {
    t.name = "interpolate";
    t.mask = "random:" + arg;
  } else if (kind == "denoise") {
    t.name = "denoise";
    t.noise = "const:" + arg;
    t.preset = "denoising";
  } else if (kind == "zoom") {
    t.name = "zoom";
    t.mask = "zoom:" + arg;
  } else {
    throw ArgumentError("bench task must be interp:<missing>, denoise:<variance> or zoom:<factor>, got '" +
                        spec + "'");
  }
  t.params = "mask=" + t.mask + " noise=" + t.noise;
  return t;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// The problem exactly as `restore` sees it after reading the files written
/// by `degrade`.
inline RestorationProblem as_stored(RestorationProblem p) {
  p.observed = to_float_precision(std::move(p.observed));
  p.noise_var = to_float_precision(std::move(p.noise_var));
  return p;
}

inline BuiltProblem degrade_image(const ImageGrid& clean, const RunConfig& cfg) {
  BuildOptions opts;
  opts.noise.clip = cfg.clip;
  BuiltProblem built = build_problem(clean, parse_mask_spec(cfg.mask, cfg.seed), parse_noise_spec(cfg.noise),
                                     cfg.seed, opts);
  built.problem = as_stored(std::move(built.problem));
  return built;
}

struct TimedRestore {
  RestoreReport report;
  double seconds = 0.0;
};

/// Restores and rounds the output to float32, the precision it is stored at.
inline TimedRestore timed_restore(const RestorationProblem& problem, const RunConfig& cfg) {
  RestoreOptions opts;
  opts.threads = cfg.threads;
  const auto t0 = std::chrono::steady_clock::now();
  TimedRestore out{restore_detailed(problem, cfg.solver, opts), 0.0};
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.report.image = to_float_precision(std::move(out.report.image));
  return out;
}

}  // namespace hbe::tools
