#pragma once

// Plain-text run configuration: one `key = value` per line, `#` starts a
// comment. Unknown keys are rejected. Keys and defaults:
//
//   preset          interpolation | denoising     (interpolation)
//   alpha_low       0.5        alpha_high      1
//   pm_threshold    0.5        m_nominal       30
//   outer_iters     3          inner_max_iters 30      inner_rel_tol 1e-6
//   init_mode       directional-gmm | smooth-fill   (directional-gmm)
//   patch_side      8          window_side     25      epsilon       1.5
//   step            1          min_group       2       unknown_weight 0.01
//   mask            none | random:<fraction> | zoom:<factor> | file:<path>   (none)
//   noise           none | const:<var> | affine:<gain>,<offset> | file:<path> (none)
//   clip            false      (clip noisy samples to [0,255])
//   seed            0          threads         1   (0 = one per core)
//   camera.gain 0.87  camera.tau 0.005  camera.mu_r 2048  camera.var_r 30
//   camera.z_sat 15000  camera.prnu <path, empty = all ones>
//   sve.levels 1,8,64,512   sve.layout nonregular | regular
//   input, output, reference, report    paths, empty by default
//   bench.images    stripes,checkerboard,filtered-noise,edges
//                   (synthetic generator names or image paths)
//   bench.tasks     interp:0.7,denoise:30
//   bench.realizations 10      bench.size 64
//
// `preset` is applied before every other key regardless of its position.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hbe/degradation.hpp"
#include "hbe/hdr_sve.hpp"
#include "hbe/io.hpp"
#include "hbe/solver.hpp"

namespace hbe {

struct RunConfig {
  std::string preset = "interpolation";
  SolverConfig solver = SolverConfig::interpolation();
  std::string mask = "none";
  std::string noise = "none";
  bool clip = false;
  std::uint64_t seed = 0;
  int threads = 1;
  CameraParams camera;
  std::string prnu_path;
  std::vector<double> sve_levels{1.0, 8.0, 64.0, 512.0};
  SveLayout sve_layout = SveLayout::nonregular;
  std::string input, output, reference, report;
  std::string bench_images = "stripes,checkerboard,filtered-noise,edges";
  std::string bench_tasks = "interp:0.7,denoise:30";
  int bench_realizations = 10;
  int bench_size = 64;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out))
    throw ArgumentError("config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline long long parse_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ArgumentError("config: '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ArgumentError("config: '" + key + "' expects true or false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
  if (out.empty()) throw ArgumentError("config: '" + key + "' expects a comma-separated list");
  return out;
}

inline std::string format_real(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct KeyHandler {
  Setter set;
  Getter get;
};

inline const std::map<std::string, KeyHandler>& config_keys() {
  static const std::map<std::string, KeyHandler> keys = [] {
    std::map<std::string, KeyHandler> k;
#define HBE_REAL(name, expr)                                                                    \
  k[name] = {[](RunConfig& c, const std::string& key, const std::string& v) {                  \
               expr = parse_real(key, v);                                                      \
             },                                                                                \
             [](const RunConfig& c) { return format_real(expr); }}
#define HBE_INT(name, expr)                                                                     \
  k[name] = {[](RunConfig& c, const std::string& key, const std::string& v) {                  \
               expr = static_cast<int>(parse_integer(key, v));                                 \
             },                                                                                \
             [](const RunConfig& c) { return std::to_string(expr); }}
#define HBE_STR(name, expr)                                                                     \
  k[name] = {[](RunConfig& c, const std::string&, const std::string& v) { expr = v; },        \
             [](const RunConfig& c) { return expr; }}
    HBE_REAL("alpha_low", c.solver.alpha_low);
    HBE_REAL("alpha_high", c.solver.alpha_high);
    HBE_REAL("pm_threshold", c.solver.pm_threshold);
    HBE_REAL("m_nominal", c.solver.m_nominal);
    HBE_INT("outer_iters", c.solver.outer_iters);
    HBE_INT("inner_max_iters", c.solver.inner.max_iters);
    HBE_REAL("inner_rel_tol", c.solver.inner.rel_tol);
    HBE_INT("patch_side", c.solver.search.patch_side);
    HBE_INT("window_side", c.solver.search.window_side);
    HBE_REAL("epsilon", c.solver.search.epsilon);
    HBE_INT("step", c.solver.search.step);
    HBE_INT("min_group", c.solver.search.min_group);
    HBE_REAL("unknown_weight", c.solver.search.unknown_weight);
    HBE_STR("mask", c.mask);
    HBE_STR("noise", c.noise);
    HBE_INT("threads", c.threads);
    HBE_REAL("camera.gain", c.camera.gain);
    HBE_REAL("camera.tau", c.camera.tau);
    HBE_REAL("camera.mu_r", c.camera.mu_R);
    HBE_REAL("camera.var_r", c.camera.var_R);
    HBE_REAL("camera.z_sat", c.camera.z_sat);
    HBE_STR("camera.prnu", c.prnu_path);
    HBE_STR("input", c.input);
    HBE_STR("output", c.output);
    HBE_STR("reference", c.reference);
    HBE_STR("report", c.report);
    HBE_STR("bench.images", c.bench_images);
    HBE_STR("bench.tasks", c.bench_tasks);
    HBE_INT("bench.realizations", c.bench_realizations);
    HBE_INT("bench.size", c.bench_size);
#undef HBE_REAL
#undef HBE_INT
#undef HBE_STR
    k["preset"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                     if (v == "interpolation") {
                       c.solver = SolverConfig::interpolation();
                     } else if (v == "denoising") {
                       c.solver = SolverConfig::denoising();
                     } else {
                       throw ArgumentError("config: preset must be interpolation or denoising, got '" + v + "'");
                     }
                     c.preset = v;
                   },
                   [](const RunConfig& c) { return c.preset; }};
    k["init_mode"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                        if (v == "directional-gmm") {
                          c.solver.init_mode = InitMode::directional_gmm;
                        } else if (v == "smooth-fill") {
                          c.solver.init_mode = InitMode::smooth_fill;
                        } else {
                          throw ArgumentError("config: init_mode must be directional-gmm or smooth-fill");
                        }
                      },
                      [](const RunConfig& c) {
                        return std::string(c.solver.init_mode == InitMode::smooth_fill ? "smooth-fill"
                                                                                       : "directional-gmm");
                      }};
    k["clip"] = {[](RunConfig& c, const std::string& key, const std::string& v) { c.clip = parse_bool(key, v); },
                 [](const RunConfig& c) { return std::string(c.clip ? "true" : "false"); }};
    k["seed"] = {[](RunConfig& c, const std::string& key, const std::string& v) {
                   const long long s = parse_integer(key, v);
                   if (s < 0) throw ArgumentError("config: seed must be non-negative");
                   c.seed = static_cast<std::uint64_t>(s);
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }};
    k["sve.levels"] = {[](RunConfig& c, const std::string& key, const std::string& v) {
                         c.sve_levels = parse_list(key, v);
                       },
                       [](const RunConfig& c) {
                         std::string s;
                         for (double l : c.sve_levels) s += (s.empty() ? "" : ",") + format_real(l);
                         return s;
                       }};
    k["sve.layout"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                         if (v == "regular") {
                           c.sve_layout = SveLayout::regular;
                         } else if (v == "nonregular") {
                           c.sve_layout = SveLayout::nonregular;
                         } else {
                           throw ArgumentError("config: sve.layout must be regular or nonregular");
                         }
                       },
                       [](const RunConfig& c) {
                         return std::string(c.sve_layout == SveLayout::regular ? "regular" : "nonregular");
                       }};
    return k;
  }();
  return keys;
}

}  // namespace detail

/// Sets one key; throws ArgumentError for unknown keys or bad values.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& keys = detail::config_keys();
  auto it = keys.find(key);
  if (it == keys.end()) throw ArgumentError("config: unknown key '" + key + "'");
  it->second.set(cfg, key, value);
}

inline std::string get_config_value(const RunConfig& cfg, const std::string& key) {
  const auto& keys = detail::config_keys();
  auto it = keys.find(key);
  if (it == keys.end()) throw ArgumentError("config: unknown key '" + key + "'");
  return it->second.get(cfg);
}

/// Parses key-value text on top of `base`.
inline RunConfig parse_config(std::string_view text, RunConfig base = {}) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ArgumentError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = detail::trim(std::string_view(t).substr(0, eq));
    std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (!detail::config_keys().contains(key))
      throw ArgumentError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    entries.emplace_back(std::move(key), std::move(value));
  }
  for (const auto& [k, v] : entries)
    if (k == "preset") set_config_value(base, k, v);
  for (const auto& [k, v] : entries)
    if (k != "preset") set_config_value(base, k, v);
  return base;
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
  Bytes bytes = read_file(path);
  return parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                      std::move(base));
}

/// Canonical `key=value` lines in key order. Paths are excluded so the hash
/// identifies the algorithmic configuration only.
inline std::string canonical_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, handler] : detail::config_keys()) {
    if (key == "input" || key == "output" || key == "reference" || key == "report") continue;
    out += key + "=" + handler.get(cfg) + "\n";
  }
  return out;
}

/// FNV-1a 64 of the canonical configuration, as 16 hex digits.
inline std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline std::pair<std::string, std::string> split_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) return {spec, ""};
  return {spec.substr(0, colon), spec.substr(colon + 1)};
}

}  // namespace detail

/// "none", "random:<fraction>", "zoom:<factor>" or "file:<path>".
inline MaskSpec parse_mask_spec(const std::string& spec, std::uint64_t seed) {
  auto [kind, arg] = detail::split_spec(spec);
  MaskSpec out;
  out.seed = seed;
  if (kind == "none") {
    out.kind = RandomMask{0.0};
  } else if (kind == "random") {
    out.kind = RandomMask{detail::parse_real("mask", arg)};
  } else if (kind == "zoom") {
    out.kind = ZoomMask{static_cast<int>(detail::parse_integer("mask", arg))};
  } else if (kind == "file") {
    out.kind = ExplicitMask{read_mask(arg)};
  } else {
    throw ArgumentError("mask spec must be none, random:<fraction>, zoom:<factor> or file:<path>, got '" +
                        spec + "'");
  }
  return out;
}

/// "none", "const:<var>", "affine:<gain>,<offset>" or "file:<path>".
inline NoiseModel parse_noise_spec(const std::string& spec) {
  auto [kind, arg] = detail::split_spec(spec);
  if (kind == "none") return ConstantNoise{0.0};
  if (kind == "const") return ConstantNoise{detail::parse_real("noise", arg)};
  if (kind == "affine") {
    auto v = detail::parse_list("noise", arg);
    if (v.size() != 2) throw ArgumentError("noise spec affine expects <gain>,<offset>");
    return AffineNoise{v[0], v[1]};
  }
  if (kind == "file") return PerPixelNoise{read_image(arg)};
  throw ArgumentError("noise spec must be none, const:<var>, affine:<gain>,<offset> or file:<path>, got '" +
                      spec + "'");
}

}  // namespace hbe
