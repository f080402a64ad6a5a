// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>

#include "ddpm/checkpoint.hpp"
#include "ddpm/denoiser.hpp"
#include "ddpm/errors.hpp"
#include "ddpm/rng.hpp"
#include "doctest.h"
#include "grad_check.hpp"

using namespace ddpm;
using doctest::Approx;

TEST_CASE("Gaussian oracle closed form") {
  const auto s2 = VarianceSchedule::linear(2, 0.1, 0.2);

  SUBCASE("vanishes at the marginal mean") {
    GaussianOracleParams p{ImageTensor::scalar(0.4), 0.8};
    const double eta = s2.eta(2);
    const ImageTensor out = oracle_predict(ImageTensor::scalar(eta * 0.4), eta, s2.sigma_marginal(2), p);
    CHECK(out[0] == Approx(0.0).epsilon(1e-15));
  }

  SUBCASE("degenerate data reads the input as pure noise") {
    GaussianOracleParams p{ImageTensor::scalar(0.0), 1e-12};
    const ImageTensor y = CounterRng(1, StreamRole::kTest).normal_like({1, 3, 3});
    const double sigma = s2.sigma_marginal(2);
    const ImageTensor out = oracle_predict(y, s2.eta(2), sigma, p);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(out[i] == Approx(y[i] / sigma).epsilon(1e-10));
  }

  SUBCASE("two-step schedule value") {
    GaussianOracleParams p{ImageTensor::scalar(0.0), 1.0};
    GaussianOracle oracle(p, s2);
    const ImageTensor out = oracle.predict(ImageTensor::scalar(1.0), nullptr, Timestep::discrete(2, 2));
    CHECK(out[0] == Approx(0.529150262212918).epsilon(1e-12));
  }

  SUBCASE("continuous and discrete evaluation paths") {
    const auto s = VarianceSchedule::linear(1000, 1e-4, 0.02);
    GaussianOracle oracle({ImageTensor::scalar(0.3), 0.7}, s);
    const ImageTensor y = ImageTensor::scalar(0.9);
    const auto c = s.continuous(0.4);
    const ImageTensor cont = oracle.predict(y, nullptr, Timestep::from_continuous(0.4, 1000));
    CHECK(cont[0] == Approx(c.sigma * (0.9 - c.eta * 0.3) / (c.eta * c.eta * 0.49 + c.sigma * c.sigma)));
  }

  CHECK_THROWS_AS(GaussianOracle({ImageTensor::scalar(0.0), 0.0}, s2), DomainError);
}

TEST_CASE("time embedding") {
  const auto e = time_embedding(0.0, 16);
  REQUIRE(e.size() == 16);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(e[2 * i] == 0.0);
    CHECK(e[2 * i + 1] == 1.0);
  }
  const auto f = time_embedding(2.5, 16);
  CHECK(f[0] == Approx(std::sin(2.5)));
  CHECK(f[3] == Approx(std::cos(2.5 * std::pow(10000.0, -1.0 / 8.0))));
}

TEST_CASE("conv denoiser layout") {
  ConvDenoiser net;
  CHECK(net.architecture().parameter_count() == 288 + 16 + 256 + 16 + 2304 + 16 + 144 + 1);
  CHECK(net.parameters().size() == net.architecture().parameter_count());
  CHECK(net.layers().size() == 8);
  CHECK(net.layers().front().name == "conv1.weight");
  CHECK(net.layer_of(0) == "conv1.weight");
  CHECK(net.layer_of(net.parameters().size() - 1) == "conv3.bias");
  CHECK_THROWS_AS(ConvDenoiser({}, std::vector<double>(10)), DomainError);
}

TEST_CASE("conv forward contract") {
  const ImageTensor y = CounterRng(3, StreamRole::kTest).normal_like({1, 8, 9});
  const ImageTensor x = CounterRng(4, StreamRole::kTest).normal_like({1, 8, 9});

  SUBCASE("zero parameters give zero output") {
    ConvDenoiser zero;
    const ImageTensor out = zero.predict(y, &x, Timestep::discrete(17, 1000));
    CHECK(out.shape() == y.shape());
    for (double v : out.values()) CHECK(v == 0.0);
  }

  SUBCASE("deterministic and shape-preserving") {
    const ConvDenoiser net = ConvDenoiser::initialized({}, 9);
    const ImageTensor a = net.predict(y, &x, Timestep::from_continuous(0.37, 1000));
    const ImageTensor b = net.predict(y, &x, Timestep::from_continuous(0.37, 1000));
    CHECK(a == b);
    CHECK(a.shape() == y.shape());
  }

  SUBCASE("finite output over the time grid") {
    const ConvDenoiser net = ConvDenoiser::initialized({}, 9);
    for (int i = 0; i <= 50; ++i) {
      const double t = 1e-3 + (1.0 - 1e-3) * i / 50.0;
      CHECK(net.predict(y, &x, Timestep::from_continuous(t, 1000)).all_finite());
      CHECK(net.predict(y, nullptr, Timestep::from_continuous(t, 1000)).all_finite());
    }
  }

  SUBCASE("unconditional mode duplicates the input") {
    const ConvDenoiser net = ConvDenoiser::initialized({}, 9);
    CHECK(net.forward(y, nullptr, 4.0) == net.forward(y, &y, 4.0));
  }

  SUBCASE("shape errors") {
    const ConvDenoiser net = ConvDenoiser::initialized({}, 9);
    const ImageTensor other({1, 4, 4});
    CHECK_THROWS_AS(net.forward(y, &other, 1.0), ShapeError);
    CHECK_THROWS_AS(net.forward(ImageTensor({2, 8, 9}), nullptr, 1.0), ShapeError);
  }
}

TEST_CASE("conv backward") {
  SUBCASE("zero loss gradient gives zero parameter gradient") {
    const ConvDenoiser net = ConvDenoiser::initialized({}, 2);
    const ImageTensor y = CounterRng(5, StreamRole::kTest).normal_like({1, 5, 5});
    ConvDenoiser::Cache cache;
    const ImageTensor out = net.forward(y, &y, 10.0, &cache);
    for (double g : net.backward(ImageTensor(out.shape()), cache)) CHECK(g == 0.0);
  }

  SUBCASE("missing cache is rejected") {
    const ConvDenoiser net;
    CHECK_THROWS_AS(net.backward(ImageTensor({1, 2, 2}), ConvDenoiser::Cache{}), std::logic_error);
  }

  SUBCASE("hand-differentiated single-pixel network") {
    // Only conv2.bias[0], conv3 centre tap of channel 0 and conv3.bias are
    // nonzero, so on a 1x1 image: out = w * silu(b2) + b3.
    ConvDenoiser net;
    auto find = [&](const std::string& name) {
      for (const auto& l : net.layers()) if (l.name == name) return l.offset;
      FAIL("missing layer");
      return std::size_t{0};
    };
    const double b2 = 0.7, w = -1.3, b3 = 0.2, target = 0.5;
    auto p = net.parameters();
    p[find("conv2.bias")] = b2;
    p[find("conv3.weight") + 4] = w;  // [0][0][1][1]
    p[find("conv3.bias")] = b3;
    const double silu_b2 = b2 / (1.0 + std::exp(-b2));

    const ImageTensor in = ImageTensor::scalar(0.3);
    ConvDenoiser::Cache cache;
    const ImageTensor out = net.forward(in, &in, 0.0, &cache);
    CHECK(out[0] == Approx(w * silu_b2 + b3));
    // loss = (out - target)^2
    const ImageTensor dl = ImageTensor::scalar(2.0 * (out[0] - target));
    const auto g = net.backward(dl, cache);
    const double r = out[0] - target;
    CHECK(g[find("conv3.weight") + 4] == Approx(2.0 * r * silu_b2));
    CHECK(g[find("conv3.bias")] == Approx(2.0 * r));
    const double sig = 1.0 / (1.0 + std::exp(-b2));
    CHECK(g[find("conv2.bias")] == Approx(2.0 * r * w * sig * (1.0 + b2 * (1.0 - sig))));
  }

  SUBCASE("finite differences agree on every layer") {
    const ConvDenoiser net = ConvDenoiser::initialized({}, 77);
    const auto report = testing::conv_gradient_check(net, 123.4, 4);
    for (const auto& entry : report) {
      INFO(entry.layer << " index " << entry.index << " analytic " << entry.analytic
                       << " numeric " << entry.numeric);
      CHECK(entry.rel_error < 1e-4);
    }
  }
}

TEST_CASE("checkpoint round trip") {
  Checkpoint c;
  c.schedule = {1000, 1e-4, 0.02};
  c.metadata = {TrainMode::kBaseline, 42, 7};
  const ConvDenoiser net = ConvDenoiser::initialized({}, 3);
  c.parameters.assign(net.parameters().begin(), net.parameters().end());

  const auto bytes = encode_checkpoint(c);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "DDPMCKPT");
  CHECK(bytes.size() == 8 + 4 + 8 + 16 + 16 + 4 + 16 + 8 + 8 * c.parameters.size());
  CHECK(decode_checkpoint(bytes) == c);
  CHECK(encode_checkpoint(decode_checkpoint(bytes)) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "ddpm_ckpt_test.ckpt";
  save_checkpoint(c, path);
  CHECK(load_checkpoint(path) == c);
  std::filesystem::remove(path);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(truncated), DataError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), DataError);
}
