#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hbe/hdr_sve.hpp"
#include "hbe/io.hpp"
#include "hbe/metrics.hpp"
#include "json.hpp"

namespace hbe {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path work_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("hbe_cli_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run(const std::string& args) {
  const std::string cmd = std::string(HBE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_capture(const std::string& args, std::string& out) {
  const fs::path tmp = fs::temp_directory_path() / "hbe_cli_test_stdout.txt";
  const std::string cmd = std::string(HBE_CLI_PATH) + " " + args + " >" + tmp.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  std::ifstream in(tmp);
  std::stringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Bytes file_bytes(const fs::path& p) { return read_file(p); }

json last_report(const fs::path& p) {
  std::ifstream in(p);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  return json::parse(last);
}

double report_psnr(const json& j) {
  const auto& v = j.at("metrics").at("psnr");
  return v.is_string() ? INFINITY : v.get<double>();
}

TEST(Cli, DegradeIsByteIdenticalAcrossRuns) {
  const fs::path d = work_dir("degrade");
  ASSERT_EQ(run("synth -k edges --width 32 --seed 4 -o " + (d / "clean.pfm").string()), 0);
  for (const char* out : {"a", "b"})
    ASSERT_EQ(run("degrade -i " + (d / "clean.pfm").string() + " -o " + (d / out).string() +
                  " --mask random:0.7 --noise const:10 --seed 1"),
              0);
  for (const char* f : {"observed.pfm", "observed.pgm", "mask.pgm", "var.pfm"})
    EXPECT_EQ(file_bytes(d / "a" / f), file_bytes(d / "b" / f)) << f;
  ImageGrid mask = read_mask(d / "a" / "mask.pgm");
  std::size_t zeros = 0;
  for (double v : mask.data) zeros += v == 0.0 ? 1 : 0;
  EXPECT_EQ(zeros, static_cast<std::size_t>(std::llround(0.7 * 32 * 32)));
}

TEST(Cli, IdentityRestoreAndMetricsFromFiles) {
  const fs::path d = work_dir("identity");
  ASSERT_EQ(run("synth -k edges --width 32 --seed 2 -o " + (d / "clean.pfm").string()), 0);
  ASSERT_EQ(run("degrade -i " + (d / "clean.pfm").string() + " -o " + (d / "p").string() + " --mask none --noise none"),
            0);
  ASSERT_EQ(run("restore -p " + (d / "p").string() + " -o " + (d / "out.pfm").string() + " -r " +
                (d / "clean.pfm").string() + " --report " + (d / "r.jsonl").string()),
            0);
  json j = last_report(d / "r.jsonl");
  EXPECT_EQ(j.at("command"), "restore");
  EXPECT_EQ(j.at("config_hash").get<std::string>().size(), 16u);
  EXPECT_TRUE(j.contains("timings"));
  const double psnr = report_psnr(j);
  EXPECT_GE(psnr, 60.0);
  const double recomputed = compute_psnr(read_image(d / "out.pfm"), read_image(d / "clean.pfm")).psnr;
  if (std::isinf(psnr))
    EXPECT_TRUE(std::isinf(recomputed));
  else
    EXPECT_NEAR(recomputed, psnr, 1e-9);
}

TEST(Cli, InterpolationMetricsMatchFiles) {
  const fs::path d = work_dir("interp");
  ASSERT_EQ(run("synth -k stripes --width 32 -o " + (d / "clean.pfm").string()), 0);
  ASSERT_EQ(run("degrade -i " + (d / "clean.pfm").string() + " -o " + (d / "p").string() +
                " --mask random:0.5 --noise const:4 --seed 9"),
            0);
  ASSERT_EQ(run("interpolate -p " + (d / "p").string() + " -o " + (d / "out.pfm").string() + " -r " +
                (d / "clean.pfm").string() + " --report " + (d / "r.jsonl").string() + " --preview " +
                (d / "out.png").string()),
            0);
  const double psnr = report_psnr(last_report(d / "r.jsonl"));
  EXPECT_NEAR(compute_psnr(read_image(d / "out.pfm"), read_image(d / "clean.pfm")).psnr, psnr, 1e-9);
  EXPECT_TRUE(fs::exists(d / "out.png"));
}

TEST(Cli, BenchRowsMatchIndividualCommands) {
  const fs::path d = work_dir("bench");
  std::string table;
  ASSERT_EQ(run_capture("bench --images stripes,edges --tasks interp:0.7,denoise:30 --realizations 1 --size 32 --seed 3",
                        table),
            0);
  std::istringstream in(table);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "image\ttask\tparams\tpsnr\truntime\tseed");
  int rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, '\t')) cols.push_back(c);
    ASSERT_EQ(cols.size(), 6u) << line;
    EXPECT_EQ(cols[5], "3");
    const std::string image = cols[0];
    const bool denoise = cols[1] == "denoise";
    const fs::path clean = d / (image + ".pfm");
    ASSERT_EQ(run("synth -k " + image + " --width 32 --seed 3 -o " + clean.string()), 0);
    const fs::path prob = d / (image + "_" + cols[1]);
    ASSERT_EQ(run("degrade -i " + clean.string() + " -o " + prob.string() +
                  (denoise ? " --mask none --noise const:30" : " --mask random:0.7 --noise none") + " --seed 3"),
              0);
    const fs::path report = prob / "r.jsonl";
    ASSERT_EQ(run(std::string(denoise ? "denoise" : "interpolate") + " -p " + prob.string() + " -o " +
                  (prob / "out.pfm").string() + " -r " + clean.string() + " --report " + report.string()),
              0);
    EXPECT_EQ(cols[3], format_psnr(report_psnr(last_report(report)))) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 4);
}

TEST(Cli, ThreadCountDoesNotChangeOutputBytes) {
  const fs::path d = work_dir("threads");
  ASSERT_EQ(run("synth -k filtered-noise --width 40 --seed 5 -o " + (d / "clean.pfm").string()), 0);
  ASSERT_EQ(run("degrade -i " + (d / "clean.pfm").string() + " -o " + (d / "p").string() +
                " --mask random:0.5 --noise const:10 --seed 5"),
            0);
  for (const char* t : {"1", "4"})
    ASSERT_EQ(run("interpolate -p " + (d / "p").string() + " -o " + (d / (std::string("out") + t + ".pfm")).string() +
                  " --threads " + t + " --report " + (d / "r.jsonl").string()),
              0);
  EXPECT_EQ(file_bytes(d / "out1.pfm"), file_bytes(d / "out4.pfm"));
}

TEST(Cli, ExitCodes) {
  const fs::path d = work_dir("exit");
  EXPECT_EQ(run("no-such-command"), 1);
  EXPECT_EQ(run("restore -o " + (d / "x.pfm").string()), 1);
  EXPECT_EQ(run("degrade -i " + (d / "missing.pgm").string() + " -o " + d.string()), 1);
  EXPECT_EQ(run("--set nonsense=1 synth -k edges -o " + (d / "y.pfm").string()), 1);
  {
    std::ofstream bad(d / "bad.pgm", std::ios::binary);
    bad << "P5\n8 8\n255\n";
  }
  EXPECT_EQ(run("restore -i " + (d / "bad.pgm").string() + " -o " + (d / "z.pfm").string()), 1);

  // A capture saturated everywhere is a state failure, not an argument error.
  CameraParams cam;
  SvePattern p = generate_sve_pattern({1, 8, 64, 512}, SveLayout::nonregular, 16, 16, 1);
  write_image(d / "raw.pfm", ImageGrid(16, 16, cam.z_sat));
  write_image(d / "pattern.pfm", p.gains);
  EXPECT_EQ(run("hdr-restore --raw " + (d / "raw.pfm").string() + " --pattern " + (d / "pattern.pfm").string() +
                " -o " + (d / "c.pfm").string()),
            2);
}

TEST(Cli, HdrSimAndRestoreRoundTrip) {
  const fs::path d = work_dir("hdr");
  ASSERT_EQ(run("synth -k hdr-scene --width 32 -o " + (d / "c.pfm").string()), 0);
  ASSERT_EQ(run("hdr-sim -i " + (d / "c.pfm").string() + " -o " + d.string() +
                " --no-noise --no-clip --set camera.z_sat=1e300 --seed 2"),
            0);
  ASSERT_EQ(run("hdr-restore --raw " + (d / "raw.pfm").string() + " --pattern " + (d / "pattern.pfm").string() +
                " -o " + (d / "out.pfm").string() + " -r " + (d / "c.pfm").string() + " --noiseless --set " +
                "camera.z_sat=1e300 --set outer_iters=1 --report " + (d / "r.jsonl").string()),
            0);
  json j = last_report(d / "r.jsonl");
  EXPECT_EQ(j.at("diagnostics").at("masked_fraction").get<double>(), 0.0);
  EXPECT_GE(report_psnr(j), 60.0);
}

}  // namespace
}  // namespace hbe
