// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cli.hpp"
#include "ddpm/checkpoint.hpp"
#include "ddpm/dataset.hpp"
#include "ddpm/rng.hpp"
#include "doctest.h"

using namespace ddpm;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ddpm_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("train command") {
  const fs::path dir = fresh_dir("train");
  const std::vector<std::string> base{"train", "--synthetic", "4", "--size", "16", "--iters", "15", "--seed", "7"};

  auto args = base;
  args.insert(args.end(), {"--out", (dir / "a").string()});
  const Run a = run_cli(args);
  REQUIRE(a.code == 0);
  args = base;
  args.insert(args.end(), {"--out", (dir / "b").string()});
  REQUIRE(run_cli(args).code == 0);
  CHECK(slurp(dir / "a" / "model.ckpt") == slurp(dir / "b" / "model.ckpt"));
  CHECK(read_csv(dir / "a" / "loss.csv").size() == 16);
  CHECK(a.out.find("iters = 15") != std::string::npos);
  CHECK(slurp(dir / "a" / "config.ini").find("seed = 7") != std::string::npos);

  SUBCASE("persisted config reproduces the run") {
    REQUIRE(run_cli({"train", "--config", (dir / "a" / "config.ini").string(), "--out", (dir / "c").string()})
                .code == 0);
    CHECK(slurp(dir / "a" / "model.ckpt") == slurp(dir / "c" / "model.ckpt"));
  }

  SUBCASE("flags override the config file") {
    std::ofstream(dir / "cfg.ini") << "# comment\nsynthetic = 2\nsize = 16\niters = 9\nlr = 1e-3\n";
    REQUIRE(run_cli({"train", "--config", (dir / "cfg.ini").string(), "--iters", "4", "--out", (dir / "d").string()})
                .code == 0);
    const Checkpoint ck = load_checkpoint(dir / "d" / "model.ckpt");
    CHECK(ck.metadata.iterations == 4);
    const std::string echoed = slurp(dir / "d" / "config.ini");
    CHECK(echoed.find("lr = 1e-3") != std::string::npos);
    CHECK(echoed.find("synthetic = 2") != std::string::npos);
  }

  SUBCASE("baseline mode is recorded") {
    REQUIRE(run_cli({"train", "--synthetic", "2", "--size", "16", "--iters", "3", "--mode", "baseline", "--out",
                     (dir / "e").string()})
                .code == 0);
    CHECK(load_checkpoint(dir / "e" / "model.ckpt").metadata.mode == TrainMode::kBaseline);
  }

  SUBCASE("usage, data and numeric failures") {
    CHECK(run_cli({"train", "--out", (dir / "f").string()}).code == 1);
    CHECK(run_cli({"train", "--synthetic", "2", "--mode", "other"}).code == 1);
    CHECK(run_cli({"train", "--data", (dir / "missing").string(), "--out", (dir / "f").string()}).code == 2);
    CHECK(run_cli({"train", "--config", (dir / "missing.ini").string()}).code == 2);
    CHECK(run_cli({"train", "--synthetic", "2", "--size", "16", "--iters", "3", "--lr", "1e200", "--out",
                   (dir / "g").string()})
              .code == 3);
    CHECK(run_cli({}).code == 1);
    CHECK(run_cli({"fly"}).code == 1);
  }
  fs::remove_all(dir);
}

TEST_CASE("sample command") {
  const fs::path dir = fresh_dir("sample");
  auto total_calls = [](const fs::path& trace) {
    std::size_t calls = 0;
    const auto rows = read_csv(trace);
    for (std::size_t i = 1; i < rows.size(); ++i) calls += std::stoul(rows[i][3]);
    return calls;
  };

  REQUIRE(run_cli({"sample", "--oracle-gaussian", "0.3,0.7", "--sampler", "dpm", "--nfe", "15", "--size", "16",
                   "--out", (dir / "dpm").string()})
              .code == 0);
  CHECK(total_calls(dir / "dpm" / "trace.csv") == 15);
  CHECK(read_csv(dir / "dpm" / "samples.csv")[1][1] == "15");
  CHECK(fs::exists(dir / "dpm" / "sample_0.imgt"));
  CHECK(fs::exists(dir / "dpm" / "sample_0.pgm"));

  REQUIRE(run_cli({"sample", "--oracle-gaussian", "0,1", "--sampler", "ancestral", "--size", "16", "--out",
                   (dir / "anc").string()})
              .code == 0);
  CHECK(total_calls(dir / "anc" / "trace.csv") == 1000);

  REQUIRE(run_cli({"sample", "--oracle-gaussian", "0,1", "--sampler", "rk4", "--rk4-steps", "5", "--size", "16",
                   "--out", (dir / "rk4").string()})
              .code == 0);
  CHECK(total_calls(dir / "rk4" / "trace.csv") == 20);

  SUBCASE("trained checkpoint with conditions") {
    REQUIRE(run_cli({"train", "--synthetic", "2", "--size", "16", "--iters", "2", "--out", (dir / "m").string()})
                .code == 0);
    REQUIRE(run_cli({"sample", "--checkpoint", (dir / "m" / "model.ckpt").string(), "--synthetic", "2", "--size",
                     "16", "--nfe", "6", "--jobs", "2", "--out", (dir / "c1").string()})
                .code == 0);
    REQUIRE(run_cli({"sample", "--checkpoint", (dir / "m" / "model.ckpt").string(), "--synthetic", "2", "--size",
                     "16", "--nfe", "6", "--out", (dir / "c2").string()})
                .code == 0);
    CHECK(slurp(dir / "c1" / "sample_1.imgt") == slurp(dir / "c2" / "sample_1.imgt"));
    CHECK(read_csv(dir / "c1" / "samples.csv").size() == 3);
    CHECK(run_cli({"sample", "--checkpoint", (dir / "m" / "model.ckpt").string(), "--out", (dir / "c3").string()})
              .code == 1);
  }

  SUBCASE("errors") {
    CHECK(run_cli({"sample", "--oracle-gaussian", "0,1", "--nfe", "0"}).code == 1);
    CHECK(run_cli({"sample", "--oracle-gaussian", "0,1", "--sampler", "euler"}).code == 1);
    CHECK(run_cli({"sample", "--oracle-gaussian", "0,1,2"}).code == 1);
    CHECK(run_cli({"sample", "--synthetic", "1"}).code == 1);
    std::ofstream(dir / "bad.ckpt") << "DDPMCKPT";
    CHECK(run_cli({"sample", "--checkpoint", (dir / "bad.ckpt").string(), "--synthetic", "1", "--out",
                   (dir / "x").string()})
              .code == 2);
  }
  fs::remove_all(dir);
}

TEST_CASE("eval command") {
  const fs::path dir = fresh_dir("eval");
  fs::create_directories(dir / "ref");
  fs::create_directories(dir / "noisy");
  fs::create_directories(dir / "empty");
  double hand_psnr_sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    const ImageTensor ref = generate_phantom(16, static_cast<std::uint64_t>(k));
    ImageTensor noisy = ref;
    CounterRng rng(50 + static_cast<std::uint64_t>(k), StreamRole::kTest);
    for (double& v : noisy.values()) v += 0.05 * rng.normal();
    save_tensor(ref, dir / "ref" / ("img" + std::to_string(k) + ".imgt"));
    save_tensor(noisy, dir / "noisy" / ("img" + std::to_string(k) + ".imgt"));
    double mse = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) mse += (ref[i] - noisy[i]) * (ref[i] - noisy[i]);
    mse /= static_cast<double>(ref.size());
    hand_psnr_sum += -10.0 * std::log10(mse);
  }

  const Run same = run_cli({"eval", "--reference", (dir / "ref").string(), "--test", (dir / "ref").string(),
                            "--out", (dir / "o1").string()});
  REQUIRE(same.code == 0);
  const auto rows = read_csv(dir / "o1" / "metrics.csv");
  REQUIRE(rows.size() == 5);
  CHECK(rows[4][0] == "mean");
  CHECK(rows[4][1] == "inf");
  CHECK(rows[4][2] == "1");

  REQUIRE(run_cli({"eval", "--reference", (dir / "ref").string(), "--test", (dir / "noisy").string(), "--out",
                   (dir / "o2").string()})
              .code == 0);
  const double mean_psnr = std::stod(read_csv(dir / "o2" / "metrics.csv")[4][1]);
  CHECK(std::abs(mean_psnr - hand_psnr_sum / 3.0) < 0.1);

  CHECK(run_cli({"eval", "--reference", (dir / "empty").string(), "--test", (dir / "empty").string(), "--out",
                 (dir / "o3").string()})
            .code == 2);
  fs::remove(dir / "noisy" / "img2.imgt");
  CHECK(run_cli({"eval", "--reference", (dir / "ref").string(), "--test", (dir / "noisy").string(), "--out",
                 (dir / "o4").string()})
            .code == 2);
  CHECK(run_cli({"eval", "--reference", (dir / "ref").string()}).code == 1);
  fs::remove_all(dir);
}

TEST_CASE("bench command") {
  const fs::path dir = fresh_dir("bench");
  const Run refused = run_cli({"bench", "--oracle-gaussian", "0,1", "--reps", "1", "--out", (dir / "a").string()});
  CHECK(refused.code == 1);
  CHECK(refused.err.find("3 or more") != std::string::npos);

  const Run ok = run_cli({"bench", "--oracle-gaussian", "0,1", "--methods", "ldct,ddpm,dpm-50", "--synthetic", "1",
                          "--size", "16", "--reps", "3", "--out", (dir / "b").string()});
  REQUIRE(ok.code == 0);
  const auto rows = read_csv(dir / "b" / "bench.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == std::vector<std::string>{"method", "psnr", "ssim", "seconds_per_image", "nfe"});
  CHECK(rows[1][0] == "ldct");
  CHECK(rows[2][0] == "ddpm");
  CHECK(rows[2][4] == "1000");
  CHECK(rows[3][4] == "50");
  CHECK(run_cli({"bench", "--oracle-gaussian", "0,1", "--methods", "dpm-x", "--out", (dir / "c").string()}).code ==
        1);
  fs::remove_all(dir);
}

TEST_CASE("orders command") {
  const fs::path dir = fresh_dir("orders");
  REQUIRE(run_cli({"orders", "--out", dir.string()}).code == 0);
  const auto rows = read_csv(dir / "orders.csv");
  REQUIRE(rows.size() == 4);
  const double tol[] = {0.3, 0.3, 0.4};
  for (int k = 1; k <= 3; ++k) {
    CHECK(rows[k][0] == "dpm-solver-" + std::to_string(k));
    CHECK(std::abs(std::stod(rows[k][1]) - k) < tol[k - 1]);
    CHECK(std::stod(rows[k][2]) >= 0.95);
  }
  CHECK(read_csv(dir / "orders_errors.csv").size() == 19);
  CHECK(run_cli({"orders", "--ladder", "8,x", "--out", dir.string()}).code == 1);
  fs::remove_all(dir);
}
