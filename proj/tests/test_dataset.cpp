// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "ddpm/dataset.hpp"
#include "ddpm/errors.hpp"
#include "ddpm/metrics.hpp"
#include "ddpm/rng.hpp"
#include "doctest.h"

using namespace ddpm;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ddpm_dataset_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("phantoms") {
  const ImageTensor a = generate_phantom(32, 5);
  CHECK(a.shape() == Shape{1, 32, 32});
  CHECK(a == generate_phantom(32, 5));
  for (double v : a.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ImageTensor b = generate_phantom(32, seed + 100);
    std::size_t differ = 0;
    for (std::size_t i = 0; i < a.size(); ++i) differ += a[i] != b[i];
    CHECK(differ >= a.size() / 100);
  }
  CHECK_THROWS_AS(generate_phantom(15, 1), DomainError);
}

TEST_CASE("low-dose simulation") {
  const ImageTensor flat({1, 100, 1000}, 0.5);
  CHECK(simulate_low_dose(flat, 1.0, 3) == flat);

  const ImageTensor noisy = simulate_low_dose(flat, 0.25, 3);
  CHECK(noisy == simulate_low_dose(flat, 0.25, 3));
  double acc = 0.0;
  for (std::size_t i = 0; i < flat.size(); ++i) acc += (noisy[i] - 0.5) * (noisy[i] - 0.5);
  const double std_est = std::sqrt(acc / static_cast<double>(flat.size()));
  CHECK(std_est == Approx(0.02 * std::sqrt(3.0)).epsilon(0.02));

  const ImageTensor p = generate_phantom(32, 8);
  const ImageTensor q = simulate_low_dose(p, 0.1, 4);
  CHECK(q.shape() == p.shape());
  for (double v : q.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(psnr(p, simulate_low_dose(p, 0.25, 4), 1.0) < psnr(p, simulate_low_dose(p, 0.5, 4), 1.0));

  CHECK_THROWS_AS(simulate_low_dose(p, 0.0, 1), DomainError);
  CHECK_THROWS_AS(simulate_low_dose(p, 1.5, 1), DomainError);
  CHECK_THROWS_AS(simulate_low_dose(ImageTensor({1, 2, 2}, 2.0), 0.5, 1), DomainError);
}

TEST_CASE("synthetic dataset") {
  const auto d = make_synthetic_dataset(5, 16, 0.25, 7);
  CHECK(d.size() == 5);
  d.validate();
  CHECK_FALSE(d.pairs[0].ndct == d.pairs[1].ndct);
  CHECK(d.pairs[3].ldct == make_synthetic_dataset(5, 16, 0.25, 7).pairs[3].ldct);

  PairedDataset bad = d;
  bad.pairs[2].ldct = ImageTensor({1, 8, 8});
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("tensor files") {
  const fs::path dir = scratch_dir("tensor");
  const ImageTensor t = CounterRng(2, StreamRole::kTest).normal_like({2, 3, 4});
  save_tensor(t, dir / "t.imgt");
  CHECK(load_tensor(dir / "t.imgt") == t);

  save_tensor(ImageTensor::scalar(1.5), dir / "one.imgt");
  const auto bytes = slurp(dir / "one.imgt");
  CHECK(bytes.size() == 24);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "IMGT");
  CHECK(bytes[4] == 1);

  auto enc = encode_tensor(t);
  enc.pop_back();
  CHECK_THROWS_AS(decode_tensor(enc), DataError);
  auto magic = encode_tensor(t);
  magic[1] = 'X';
  CHECK_THROWS_AS(decode_tensor(magic), DataError);
  auto dims = encode_tensor(t);
  dims[4] = 0;
  dims[5] = 0;
  CHECK_THROWS(decode_tensor(dims));
  CHECK_THROWS_AS(load_tensor(dir / "missing.imgt"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("paired directories") {
  const fs::path dir = scratch_dir("pairs");
  auto d = make_synthetic_dataset(3, 16, 0.5, 1);
  d.metadata.window_low = -160.0;
  d.metadata.window_high = 240.0;
  save_paired_dir(d, dir);
  const auto back = load_paired_dir(dir);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.pairs[i].ldct == d.pairs[i].ldct);
    CHECK(back.pairs[i].ndct == d.pairs[i].ndct);
  }
  CHECK(back.metadata.window_low == -160.0);
  CHECK(back.metadata.window_high == 240.0);

  fs::remove(dir / "pair_1_ndct.imgt");
  CHECK_THROWS_AS(load_paired_dir(dir), DataError);
  CHECK_THROWS_AS(load_paired_dir(dir / "nope"), DataError);
  const fs::path empty = scratch_dir("empty");
  CHECK_THROWS_AS(load_paired_dir(empty), DataError);
  fs::remove_all(dir);
  fs::remove_all(empty);
}

TEST_CASE("display windowing") {
  CHECK(window_to_gray(-160.0, -160.0, 240.0) == 0);
  CHECK(window_to_gray(240.0, -160.0, 240.0) == 255);
  CHECK(window_to_gray(40.0, -160.0, 240.0) == 128);  // 127.5 rounds to even
  CHECK(window_to_gray(-500.0, -160.0, 240.0) == 0);
  CHECK(window_to_gray(900.0, -160.0, 240.0) == 255);
  CHECK_THROWS_AS(window_to_gray(0.0, 1.0, 1.0), DomainError);

  const fs::path dir = scratch_dir("pgm");
  ImageTensor img({1, 2, 3});
  img.at(0, 0, 0) = 0.0;
  img.at(0, 0, 1) = 0.5;
  img.at(0, 0, 2) = 1.0;
  img.at(0, 1, 0) = -1.0;
  img.at(0, 1, 1) = 2.0;
  img.at(0, 1, 2) = 0.25;
  export_display_png(img, 0.0, 1.0, dir / "x.pgm");
  const auto bytes = slurp(dir / "x.pgm");
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 6);
  CHECK(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())) == header);
  const std::vector<unsigned char> pixels(bytes.begin() + static_cast<long>(header.size()),
                                          bytes.end());
  CHECK(pixels == std::vector<unsigned char>{0, 128, 255, 0, 255, 64});
  CHECK_THROWS_AS(export_display_png(img, 1.0, 0.0, dir / "y.pgm"), DomainError);
  fs::remove_all(dir);
}
