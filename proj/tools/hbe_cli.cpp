// hbe: command-line front end for the restoration library.
//
// Exit codes: 0 success, 1 argument / file errors, 2 numerical or state
// failures.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "experiment.hpp"
#include "hbe/hbe.hpp"
#include "png_preview.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

using namespace hbe;

// Configuration layering: defaults, then the --config file, then flags.
struct ConfigSource {
  std::string file;
  std::vector<std::pair<std::string, std::string>> overrides;

  void set(const std::string& key, const std::string& value) { overrides.emplace_back(key, value); }

  /// A forced preset (from the subcommand, else from --set) replaces the
  /// one in the file; every other key still applies on top of it.
  RunConfig build(std::optional<std::string> forced_preset = std::nullopt) const {
    if (!forced_preset)
      for (const auto& [k, v] : overrides)
        if (k == "preset") forced_preset = v;
    std::string text;
    if (!file.empty()) {
      Bytes bytes = read_file(file);
      text.assign(bytes.begin(), bytes.end());
    }
    RunConfig base;
    if (forced_preset) {
      std::string kept;
      std::istringstream in(text);
      std::string line;
      while (std::getline(in, line)) {
        const std::string body = detail::trim(line.substr(0, line.find('#')));
        const auto eq = body.find('=');
        const bool is_preset = eq != std::string::npos && detail::trim(body.substr(0, eq)) == "preset";
        kept += (is_preset ? std::string() : line) + "\n";
      }
      text = std::move(kept);
      set_config_value(base, "preset", *forced_preset);
    }
    RunConfig cfg = parse_config(text, base);
    for (const auto& [k, v] : overrides)
      if (k != "preset") set_config_value(cfg, k, v);
    return cfg;
  }
};

json config_json(const RunConfig& cfg) {
  json j = json::object();
  std::istringstream in(canonical_config(cfg));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    j[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return j;
}

json psnr_json(double psnr) {
  if (std::isinf(psnr)) return "inf";
  return psnr;
}

void emit_report(const std::string& path, const json& j) {
  if (path.empty()) {
    std::cout << j.dump() << "\n";
    return;
  }
  std::ofstream out(path, std::ios::app);
  if (!out) throw ArgumentError("cannot open report '" + path + "'");
  out << j.dump() << "\n";
}

void write_output(const std::string& path, const ImageGrid& img) {
  if (path.empty()) throw ArgumentError("an output path is required");
  write_image(path, img);
}

// ---- restore family --------------------------------------------------------

struct RestoreArgs {
  std::string problem_dir, observed, mask_file, var_file, output, reference, report, preview;
};

RestorationProblem load_problem(const RestoreArgs& a, const RunConfig& cfg) {
  std::string observed = a.observed, mask = a.mask_file, var = a.var_file;
  if (!a.problem_dir.empty()) {
    const fs::path dir(a.problem_dir);
    if (observed.empty()) observed = (dir / "observed.pfm").string();
    if (mask.empty() && fs::exists(dir / "mask.pgm")) mask = (dir / "mask.pgm").string();
    if (var.empty() && fs::exists(dir / "var.pfm")) var = (dir / "var.pfm").string();
  }
  if (observed.empty()) throw ArgumentError("restore: give --problem or --input");
  RestorationProblem p;
  p.observed = read_image(observed);
  p.mask = mask.empty() ? ImageGrid(p.observed.width, p.observed.height, 1.0) : read_mask(mask);
  if (!var.empty()) {
    p.noise_var = read_image(var);
  } else {
    p.noise_var = noise_variance_map(p.observed, parse_noise_spec(cfg.noise));
  }
  require_same_shape(p.observed, p.mask, "restore: mask");
  require_same_shape(p.observed, p.noise_var, "restore: noise variance");
  for (std::size_t i = 0; i < p.observed.size(); ++i) {
    if (p.mask.data[i] == 0.0) {
      p.observed.data[i] = 0.0;
      p.noise_var.data[i] = kMaskedNoiseVariance;
    }
    p.noise_var.data[i] = std::max(p.noise_var.data[i], kMinNoiseVariance);
  }
  return p;
}

int run_restore(const std::string& command, const RestorationProblem& problem, const RunConfig& cfg,
                const RestoreArgs& a, json inputs) {
  tools::TimedRestore r = tools::timed_restore(problem, cfg);
  write_output(a.output, r.report.image);
  if (!a.preview.empty()) tools::write_png_preview(a.preview, r.report.image);

  json j;
  j["command"] = command;
  j["inputs"] = std::move(inputs);
  j["output"] = a.output;
  j["config_hash"] = config_hash(cfg);
  j["config"] = config_json(cfg);
  if (!a.reference.empty()) {
    j["reference"] = a.reference;
    Metrics m = compute_psnr(r.report.image, read_image(a.reference));
    j["metrics"] = {{"psnr", psnr_json(m.psnr)}, {"mse", m.mse}};
  } else {
    j["metrics"] = nullptr;
  }
  j["timings"] = {{"restore_s", r.seconds}};
  j["diagnostics"] = {{"failed_groups", r.report.failed_groups},
                      {"single_patch_groups", r.report.single_patch_groups},
                      {"groups_per_iteration", r.report.groups_per_iteration}};
  emit_report(a.report, j);
  return 0;
}

void add_restore_io(CLI::App* sub, RestoreArgs& a) {
  sub->add_option("-p,--problem", a.problem_dir, "Directory written by `degrade`");
  sub->add_option("-i,--input", a.observed, "Observed image (PGM or PFM)");
  sub->add_option("--mask-file", a.mask_file, "Mask image (nonzero = observed); default all observed");
  sub->add_option("--var-file", a.var_file, "Per-pixel noise variance (PFM); default from --noise");
  sub->add_option("-o,--output", a.output, "Restored image (.pfm or .pgm)")->required();
  sub->add_option("-r,--reference", a.reference, "Ground truth for metrics");
  sub->add_option("--report", a.report, "Append the JSON-lines report here (default stdout)");
  sub->add_option("--preview", a.preview, "8-bit PNG preview of the result");
}

json restore_inputs(const RestoreArgs& a) {
  return {{"problem", a.problem_dir}, {"observed", a.observed}, {"mask", a.mask_file}, {"var", a.var_file}};
}

// ---- bench -----------------------------------------------------------------

struct BenchRow {
  std::string image, task, params;
  double psnr = 0.0, runtime = 0.0;
  std::uint64_t seed = 0;
};

std::vector<BenchRow> run_bench(const ConfigSource& src, std::ostream& log) {
  const RunConfig base = src.build();
  if (base.bench_realizations < 1) throw ArgumentError("bench: bench.realizations must be >= 1");
  std::vector<BenchRow> rows;
  for (const std::string& image : tools::split_list(base.bench_images)) {
    ImageGrid clean = tools::is_synthetic(image)
                          ? tools::synthesize(image, base.bench_size, base.bench_size, base.seed)
                          : read_image(image);
    clean = to_float_precision(std::move(clean));
    for (const std::string& spec : tools::split_list(base.bench_tasks)) {
      const tools::BenchTask task = tools::parse_task(spec);
      RunConfig cfg = src.build(task.preset);
      cfg.mask = task.mask;
      cfg.noise = task.noise;
      BenchRow row{image, task.name, task.params, 0.0, 0.0, base.seed};
      for (int r = 0; r < base.bench_realizations; ++r) {
        cfg.seed = base.seed + static_cast<std::uint64_t>(r);
        BuiltProblem built = tools::degrade_image(clean, cfg);
        tools::TimedRestore res = tools::timed_restore(built.problem, cfg);
        row.psnr += compute_psnr(res.report.image, clean).psnr;
        row.runtime += res.seconds;
      }
      row.psnr /= base.bench_realizations;
      row.runtime /= base.bench_realizations;
      log << image << " " << spec << " psnr " << format_psnr(row.psnr) << "\n";
      rows.push_back(row);
    }
  }
  return rows;
}

std::string bench_tsv(const std::vector<BenchRow>& rows) {
  std::string out = "image\ttask\tparams\tpsnr\truntime\tseed\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.3f", r.runtime);
    out += r.image + "\t" + r.task + "\t" + r.params + "\t" + format_psnr(r.psnr) + "\t" + buf + "\t" +
           std::to_string(r.seed) + "\n";
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patch-based restoration with a Normal-Wishart hyperprior"};
  app.require_subcommand(1);
  app.fallthrough();

  ConfigSource src;
  std::vector<std::string> sets;
  std::optional<int> threads;
  std::optional<long long> seed;
  app.add_option("--config", src.file, "Key-value configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "Override one configuration key (key=value); repeatable");
  app.add_option("--threads", threads, "Worker threads (0 = one per core)");
  app.add_option("--seed", seed, "Seed for all randomness");

  // synth
  std::string synth_kind = "stripes", synth_out;
  int synth_w = 64, synth_h = 0;
  auto* synth = app.add_subcommand("synth", "Write a procedural test image");
  synth->add_option("-k,--kind", synth_kind, "Generator")
      ->check(CLI::IsMember(hbe::tools::synthetic_names()));
  synth->add_option("--width", synth_w, "Width");
  synth->add_option("--height", synth_h, "Height (default: width)");
  synth->add_option("-o,--output", synth_out, "Output image (.pfm or .pgm)")->required();

  // degrade
  std::string deg_in, deg_out;
  std::optional<std::string> deg_mask, deg_noise;
  bool deg_clip = false;
  auto* degrade = app.add_subcommand("degrade", "Clean image -> observed.pfm/.pgm, mask.pgm, var.pfm");
  degrade->add_option("-i,--input", deg_in, "Clean image")->required();
  degrade->add_option("-o,--output", deg_out, "Output directory")->required();
  degrade->add_option("--mask", deg_mask, "none | random:<fraction> | zoom:<factor> | file:<path>");
  degrade->add_option("--noise", deg_noise, "none | const:<var> | affine:<gain>,<offset> | file:<path>");
  degrade->add_flag("--clip", deg_clip, "Clip noisy samples to [0,255]");

  // restore and presets
  RestoreArgs ra;
  std::optional<std::string> restore_noise;
  auto* restore_cmd = app.add_subcommand("restore", "Restore a degraded image");
  add_restore_io(restore_cmd, ra);
  restore_cmd->add_option("--noise", restore_noise, "Noise spec used when no --var-file is given");
  auto* denoise_cmd = app.add_subcommand("denoise", "restore with the denoising preset");
  add_restore_io(denoise_cmd, ra);
  denoise_cmd->add_option("--noise", restore_noise, "Noise spec used when no --var-file is given");
  auto* interp_cmd = app.add_subcommand("interpolate", "restore with the interpolation preset");
  add_restore_io(interp_cmd, ra);
  interp_cmd->add_option("--noise", restore_noise, "Noise spec used when no --var-file is given");

  std::string zoom_in;
  int zoom_factor = 2;
  double zoom_var = 0.0;
  auto* zoom_cmd = app.add_subcommand("zoom", "Upsample by 2, 3 or 4 with the interpolation preset");
  zoom_cmd->add_option("-i,--input", zoom_in, "Low-resolution image")->required();
  zoom_cmd->add_option("-f,--factor", zoom_factor, "Zoom factor")->check(CLI::Range(2, 4));
  zoom_cmd->add_option("--noise-var", zoom_var, "Noise variance of the low-resolution samples");
  zoom_cmd->add_option("-o,--output", ra.output, "Output image")->required();
  zoom_cmd->add_option("-r,--reference", ra.reference, "High-resolution ground truth");
  zoom_cmd->add_option("--report", ra.report, "Append the JSON-lines report here (default stdout)");
  zoom_cmd->add_option("--preview", ra.preview, "8-bit PNG preview");

  // HDR
  std::string hs_in, hs_out;
  bool hs_no_noise = false, hs_no_clip = false;
  auto* hdr_sim = app.add_subcommand("hdr-sim", "Irradiance -> SVE raw capture (raw.pfm, pattern.pfm)");
  hdr_sim->add_option("-i,--input", hs_in, "Irradiance image (PFM)")->required();
  hdr_sim->add_option("-o,--output", hs_out, "Output directory")->required();
  hdr_sim->add_flag("--no-noise", hs_no_noise, "Noise-free capture");
  hdr_sim->add_flag("--no-clip", hs_no_clip, "Skip clipping to [0, z_sat]");

  std::string hr_raw, hr_pattern, hr_out, hr_ref, hr_preview, hr_report;
  bool hr_noiseless = false;
  auto* hdr_restore = app.add_subcommand("hdr-restore", "Reconstruct irradiance from an SVE capture");
  hdr_restore->add_option("--raw", hr_raw, "Raw capture (PFM)")->required();
  hdr_restore->add_option("--pattern", hr_pattern, "Per-pixel exposure gains (PFM)")->required();
  hdr_restore->add_option("-o,--output", hr_out, "Irradiance output (.pfm)")->required();
  hdr_restore->add_option("-r,--reference", hr_ref, "Ground-truth irradiance");
  hdr_restore->add_option("--preview", hr_preview, "Log tone-mapped PNG preview");
  hdr_restore->add_option("--report", hr_report, "Append the JSON-lines report here (default stdout)");
  hdr_restore->add_flag("--noiseless", hr_noiseless, "The capture is noise-free");

  // bench
  std::string bench_out;
  std::optional<std::string> bench_images, bench_tasks;
  std::optional<int> bench_reps, bench_size;
  auto* bench = app.add_subcommand("bench", "PSNR table over a corpus (TSV)");
  bench->add_option("-o,--output", bench_out, "TSV output (default stdout)");
  bench->add_option("--images", bench_images, "Comma list of generator names or image paths");
  bench->add_option("--tasks", bench_tasks, "Comma list of interp:<missing>, denoise:<var>, zoom:<factor>");
  bench->add_option("--realizations", bench_reps, "Realizations averaged per row");
  bench->add_option("--size", bench_size, "Side of generated images");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw hbe::ArgumentError("--set expects key=value, got '" + s + "'");
      src.set(hbe::detail::trim(s.substr(0, eq)), hbe::detail::trim(s.substr(eq + 1)));
    }
    if (threads) src.set("threads", std::to_string(*threads));
    if (seed) src.set("seed", std::to_string(*seed));

    if (*synth) {
      const RunConfig cfg = src.build();
      hbe::ImageGrid img = hbe::tools::synthesize(synth_kind, synth_w, synth_h > 0 ? synth_h : synth_w, cfg.seed);
      write_output(synth_out, img);
      return 0;
    }

    if (*degrade) {
      if (deg_mask) src.set("mask", *deg_mask);
      if (deg_noise) src.set("noise", *deg_noise);
      if (deg_clip) src.set("clip", "true");
      const RunConfig cfg = src.build();
      const hbe::ImageGrid clean = hbe::read_image(deg_in);
      hbe::BuiltProblem built = hbe::tools::degrade_image(clean, cfg);
      const fs::path dir(deg_out);
      fs::create_directories(dir);
      hbe::write_image(dir / "observed.pfm", built.problem.observed);
      hbe::write_image(dir / "observed.pgm", built.problem.observed);
      hbe::write_mask(dir / "mask.pgm", built.problem.mask);
      hbe::write_image(dir / "var.pfm", built.problem.noise_var);
      return 0;
    }

    if (*restore_cmd || *denoise_cmd || *interp_cmd) {
      if (restore_noise) src.set("noise", *restore_noise);
      std::optional<std::string> preset;
      std::string name = "restore";
      if (*denoise_cmd) preset = "denoising", name = "denoise";
      if (*interp_cmd) preset = "interpolation", name = "interpolate";
      const RunConfig cfg = src.build(preset);
      return run_restore(name, load_problem(ra, cfg), cfg, ra, restore_inputs(ra));
    }

    if (*zoom_cmd) {
      const RunConfig cfg = src.build(std::string("interpolation"));
      const hbe::ImageGrid low = hbe::read_image(zoom_in);
      hbe::RestorationProblem p = hbe::zoom_problem(low, zoom_factor, zoom_var);
      return run_restore("zoom", p, cfg, ra, {{"lowres", zoom_in}, {"factor", zoom_factor}});
    }

    if (*hdr_sim) {
      const RunConfig cfg = src.build();
      const hbe::ImageGrid irr = hbe::read_image(hs_in);
      hbe::CameraParams cam = cfg.camera;
      if (!cfg.prnu_path.empty()) cam.prnu = hbe::read_image(cfg.prnu_path);
      const hbe::SvePattern pattern =
          hbe::generate_sve_pattern(cfg.sve_levels, cfg.sve_layout, irr.width, irr.height, cfg.seed);
      const hbe::ImageGrid raw =
          hbe::simulate_sve_capture(irr, pattern, cam, cfg.seed, {!hs_no_noise, !hs_no_clip});
      const fs::path dir(hs_out);
      fs::create_directories(dir);
      hbe::write_image(dir / "raw.pfm", raw);
      hbe::write_image(dir / "pattern.pfm", pattern.gains);
      return 0;
    }

    if (*hdr_restore) {
      const RunConfig cfg = src.build();
      hbe::CameraParams cam = cfg.camera;
      if (!cfg.prnu_path.empty()) cam.prnu = hbe::read_image(cfg.prnu_path);
      hbe::SvePattern pattern;
      pattern.gains = hbe::read_image(hr_pattern);
      pattern.levels = cfg.sve_levels;
      pattern.layout = cfg.sve_layout;
      hbe::HdrOptions opts;
      opts.assume_noiseless = hr_noiseless;
      opts.threads = cfg.threads;
      const auto t0 = std::chrono::steady_clock::now();
      hbe::HdrReport rep = hbe::reconstruct_hdr_detailed(hbe::read_image(hr_raw), pattern, cam, cfg.solver, opts);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const hbe::ImageGrid out = hbe::to_float_precision(rep.irradiance);
      write_output(hr_out, out);
      if (!hr_preview.empty()) hbe::tools::write_png_preview(hr_preview, hbe::tone_map_log(out));
      json j;
      j["command"] = "hdr-restore";
      j["inputs"] = {{"raw", hr_raw}, {"pattern", hr_pattern}, {"noiseless", hr_noiseless}};
      j["output"] = hr_out;
      j["config_hash"] = hbe::config_hash(cfg);
      j["config"] = config_json(cfg);
      if (!hr_ref.empty()) {
        const hbe::ImageGrid ref = hbe::read_image(hr_ref);
        const double peak = *std::max_element(ref.data.begin(), ref.data.end());
        hbe::Metrics m = hbe::compute_psnr(hbe::normalize_to_255(out, peak), hbe::normalize_to_255(ref, peak));
        j["reference"] = hr_ref;
        j["metrics"] = {{"psnr", psnr_json(m.psnr)}, {"mse", m.mse}, {"scale", "reference max -> 255"}};
      } else {
        j["metrics"] = nullptr;
      }
      j["timings"] = {{"restore_s", secs}};
      j["diagnostics"] = {{"masked_fraction", rep.masked_fraction}, {"failed_groups", rep.failed_groups}};
      emit_report(hr_report, j);
      return 0;
    }

    if (*bench) {
      if (bench_images) src.set("bench.images", *bench_images);
      if (bench_tasks) src.set("bench.tasks", *bench_tasks);
      if (bench_reps) src.set("bench.realizations", std::to_string(*bench_reps));
      if (bench_size) src.set("bench.size", std::to_string(*bench_size));
      const std::string table = bench_tsv(run_bench(src, std::cerr));
      if (bench_out.empty()) {
        std::cout << table;
      } else {
        std::ofstream out(bench_out);
        if (!out) throw hbe::ArgumentError("cannot open '" + bench_out + "'");
        out << table;
      }
      return 0;
    }
  } catch (const hbe::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const hbe::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
