#include <doctest.h>

#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "svbrdf/cli.hpp"
#include "svbrdf/datagen.hpp"
#include "svbrdf/png_io.hpp"

using namespace svbrdf;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

std::filesystem::path fresh_dir(const char* leaf) {
  namespace fs = std::filesystem;
  fs::path p = fs::temp_directory_path() / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs run_cli with stdout/stderr redirected to files; the CLI prints with
// C stdio, so redirecting the underlying descriptors captures everything.
CliResult run_captured(const std::vector<std::string>& args) {
  namespace fs = std::filesystem;
  std::string out_path =
      (fs::temp_directory_path() / "svbrdf_cli_stdout.txt").string();
  std::string err_path =
      (fs::temp_directory_path() / "svbrdf_cli_stderr.txt").string();

  std::fflush(stdout);
  std::fflush(stderr);
  int saved_out = dup(fileno(stdout));
  int saved_err = dup(fileno(stderr));
  REQUIRE(saved_out >= 0);
  REQUIRE(saved_err >= 0);
  REQUIRE(std::freopen(out_path.c_str(), "w", stdout) != nullptr);
  REQUIRE(std::freopen(err_path.c_str(), "w", stderr) != nullptr);

  CliResult r;
  r.code = run_cli(args);

  std::fflush(stdout);
  std::fflush(stderr);
  dup2(saved_out, fileno(stdout));
  dup2(saved_err, fileno(stderr));
  close(saved_out);
  close(saved_err);

  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

}  // namespace

TEST_CASE("synth with count zero exits cleanly with an empty manifest") {
  std::string dir = fresh_dir("svbrdf_cli_synth0").string();
  CliResult r = run_captured({"synth", "--count", "0", "--out", dir});
  CHECK(r.code == 0);
  CHECK(r.out.find("wrote 0 samples") != std::string::npos);
  CHECK(r.out.find("manifest_hash=") != std::string::npos);
  DatasetManifest m = load_manifest(dir + "/manifest.json");
  CHECK(m.samples.empty());
}

TEST_CASE("synth is seed-reproducible and reports the manifest hash") {
  std::string dir_a = fresh_dir("svbrdf_cli_synth_a").string();
  std::string dir_b = fresh_dir("svbrdf_cli_synth_b").string();
  std::vector<std::string> base = {"synth",  "--count",      "3",
                                   "--seed", "9",            "--resolution",
                                   "16",     "--blend-fraction", "0.5"};

  std::vector<std::string> args_a = base;
  args_a.push_back("--out");
  args_a.push_back(dir_a);
  CliResult ra = run_captured(args_a);
  CHECK(ra.code == 0);

  std::vector<std::string> args_b = base;
  args_b.push_back("--out");
  args_b.push_back(dir_b);
  CliResult rb = run_captured(args_b);
  CHECK(rb.code == 0);

  auto hash_line = [](const std::string& out) {
    size_t pos = out.find("manifest_hash=");
    REQUIRE(pos != std::string::npos);
    return out.substr(pos, out.find('\n', pos) - pos);
  };
  CHECK(hash_line(ra.out) == hash_line(rb.out));

  char expect[40];
  std::snprintf(expect, sizeof(expect), "manifest_hash=%016llx",
                (unsigned long long)manifest_hash(
                    load_manifest(dir_a + "/manifest.json")));
  CHECK(hash_line(ra.out) == expect);

  for (int i = 0; i < 3; ++i)
    CHECK(slurp(sample_dir(dir_a, i) + "/input.png") ==
          slurp(sample_dir(dir_b, i) + "/input.png"));
}

TEST_CASE("predict reports a missing checkpoint path on stderr") {
  std::string out = fresh_dir("svbrdf_cli_missing").string();
  CliResult r = run_captured({"predict", "--ckpt", "/nonexistent/model.svbf",
                              "--input", "also_missing.png", "--out", out});
  CHECK(r.code != 0);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK(r.err.find("/nonexistent/model.svbf") != std::string::npos);
}

TEST_CASE("bad invocations exit nonzero, help exits zero") {
  CliResult missing_required = run_captured({"synth"});
  CHECK(missing_required.code != 0);
  CHECK(!missing_required.err.empty());

  CliResult unknown = run_captured({"frobnicate"});
  CHECK(unknown.code != 0);

  CliResult none = run_captured({});
  CHECK(none.code != 0);

  CliResult help = run_captured({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("synth") != std::string::npos);
  CHECK(help.out.find("gradcheck") != std::string::npos);
}

TEST_CASE("config file values override defaults") {
  namespace fs = std::filesystem;
  std::string dir = fresh_dir("svbrdf_cli_cfg").string();
  std::string cfg_path = (fs::path(dir) / "forge.cfg").string();
  {
    std::ofstream f(cfg_path);
    f << "synth.count=2\nsynth.resolution=16\n";
  }
  std::string out = fresh_dir("svbrdf_cli_cfg_out").string();
  CliResult r =
      run_captured({"--config", cfg_path, "synth", "--out", out});
  CHECK(r.code == 0);
  DatasetManifest m = load_manifest(out + "/manifest.json");
  CHECK(m.count == 2);
  CHECK(m.resolution == 16);
}

TEST_CASE("gradcheck subcommand passes on this build") {
  CliResult r = run_captured({"gradcheck"});
  CHECK(r.code == 0);
  CHECK(r.out.find("worst relative error") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.err.empty());
}

TEST_CASE("synth, train, eval, predict and relight chain end to end") {
  std::string data = fresh_dir("svbrdf_cli_pipe_data").string();
  CliResult synth = run_captured({"synth", "--count", "21", "--seed", "33",
                                  "--resolution", "32", "--out", data});
  REQUIRE(synth.code == 0);

  std::string run_dir = fresh_dir("svbrdf_cli_pipe_run").string();
  CliResult train = run_captured({"train", "--data", data, "--out", run_dir,
                                  "--iterations", "2", "--batch", "2",
                                  "--resolution", "32", "--seed", "1"});
  REQUIRE(train.code == 0);
  std::string ckpt = run_dir + "/model.svbf";
  REQUIRE(std::filesystem::exists(ckpt));

  std::string report_path = run_dir + "/report.csv";
  CliResult eval = run_captured({"eval", "--ckpt", ckpt, "--data", data,
                                 "--baseline", "--out", report_path});
  CHECK(eval.code == 0);
  CHECK(eval.out.rfind("# model\n", 0) == 0);
  CHECK(eval.out.find("# baseline\n") != std::string::npos);
  CHECK(slurp(report_path) == eval.out);

  std::string pred_dir = run_dir + "/pred";
  CliResult predict =
      run_captured({"predict", "--ckpt", ckpt, "--input",
                    sample_dir(data, 0) + "/input.png", "--out", pred_dir});
  CHECK(predict.code == 0);
  for (const char* f : {"normal.png", "diffuse.png", "specular.png",
                        "roughness.png", "meta.json", "grid.png"})
    CHECK(std::filesystem::exists(pred_dir + "/" + std::string(f)));
  PngImage grid = read_png(pred_dir + "/grid.png");
  CHECK(grid.width == 6 * 32);
  CHECK(grid.height == 32);
  CHECK(grid.bit_depth == 8);

  std::string rl_dir = run_dir + "/relight";
  CliResult relight = run_captured(
      {"relight", "--bundle", pred_dir, "--out", rl_dir, "--frames", "3"});
  CHECK(relight.code == 0);
  for (const char* f : {"frame_000.png", "frame_001.png", "frame_002.png"}) {
    PngImage frame = read_png(rl_dir + "/" + std::string(f));
    CHECK(frame.width == 32);
    CHECK(frame.height == 32);
    CHECK(frame.channels == 3);
  }
  CHECK(!std::filesystem::exists(rl_dir + "/frame_003.png"));
}
