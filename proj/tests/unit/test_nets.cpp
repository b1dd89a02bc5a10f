#include <doctest.h>

#include "cp3er/critic.hpp"
#include "cp3er/nets.hpp"
#include "oracles.hpp"

using namespace cp3er;
using cp3er::testing::random_tensor;

TEST_CASE("MLP with zero final layer outputs exactly zero") {
  MlpSpec spec{5, 16, 2, 3};
  spec.zero_final = true;
  Rng rng(1);
  ParamSet p = init_mlp_params(spec, rng);
  Tensor y = mlp_forward(spec, p, random_tensor({4, 5}, rng, 3.0));
  for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("hand-set one-hidden-layer MLP") {
  MlpSpec spec{2, 2, 1, 1};
  Rng rng(2);
  ParamSet p = init_mlp_params(spec, rng);
  REQUIRE(p.size() == 4);
  auto set = [&](std::size_t i, std::vector<double> v) { std::copy(v.begin(), v.end(), p.entries()[i].tensor.data().begin()); };
  set(0, {1, -1, 2, 0.5});  // W1 [2×2]
  set(1, {0.1, -3});        // b1
  set(2, {2, -1});          // W2 [2×1]
  set(3, {0.25});           // b2
  Tensor y = mlp_forward(spec, p, Tensor::matrix({{1, 2}}));
  // h = relu([1·1 + 2·2 + 0.1, 1·-1 + 2·0.5 - 3]) = [5.1, 0]
  CHECK(y.item() == doctest::Approx(2 * 5.1 + 0.25).epsilon(1e-14));
}

TEST_CASE("identical rows give identical outputs") {
  MlpSpec spec{3, 8, 2, 2};
  Rng rng(3);
  ParamSet p = init_mlp_params(spec, rng);
  Tensor x = Tensor::matrix({{0.1, -0.4, 0.9}, {0.1, -0.4, 0.9}});
  Tensor y = mlp_forward(spec, p, x);
  CHECK(y.at(0, 0) == y.at(1, 0));
  CHECK(y.at(0, 1) == y.at(1, 1));
}

TEST_CASE("parameter count and orthogonal init") {
  MlpSpec spec{4, 8, 2, 2};
  CHECK(spec.param_count() == (4 + 1) * 8 + (8 + 1) * 8 + (8 + 1) * 2);
  Rng rng(4);
  CHECK(init_mlp_params(spec, rng).numel() == spec.param_count());
  const auto q = orthogonal_matrix(6, 4, 1.0, rng);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double dot = 0.0;
      for (std::size_t r = 0; r < 6; ++r) dot += q[r * 4 + i] * q[r * 4 + j];
      CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
    }
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS(MlpSpec{0, 8, 2, 1}.validate());
  ConvEncoderSpec enc;
  enc.height = enc.width = 4;
  CHECK_THROWS(enc.validate());
}

TEST_CASE("encoder on blank and identical images") {
  ConvEncoderSpec spec;
  Rng rng(5);
  ParamSet p = init_encoder_params(spec, rng);
  Tensor blank({1, 3, 32, 32}, 0.0);
  Tensor f = encoder_forward(spec, p, blank);
  CHECK(f.shape() == Shape{1, spec.feature_dim});
  for (double v : f.data()) CHECK(v == 0.0);

  Tensor img = random_tensor({1, 3, 32, 32}, rng);
  Tensor two({2, 3, 32, 32});
  std::copy(img.data().begin(), img.data().end(), two.data().begin());
  std::copy(img.data().begin(), img.data().end(), two.data().begin() + static_cast<std::ptrdiff_t>(img.numel()));
  Tensor g = encoder_forward(spec, p, two);
  for (std::size_t j = 0; j < spec.feature_dim; ++j) CHECK(g.at(0, j) == g.at(1, j));
}

TEST_CASE("critic loss gradient reaches the conv kernels") {
  ConvEncoderSpec spec;
  spec.channels = 1;
  spec.feature_dim = 8;
  Rng rng(6);
  ParamSet enc = init_encoder_params(spec, rng);
  CriticOptions co;
  co.hidden_dim = 16;
  co.target_samples = 4;
  Critic critic(8, 1, co, rng);
  Tensor frames = random_tensor({4, 1, 32, 32}, rng);
  Tape tape;
  {
    Tape::Scope scope(tape);
    Tensor states = encoder_forward(spec, enc, frames);
    Tensor next;
    {
      Tape::Pause pause;
      next = encoder_forward(spec, enc, frames);
    }
    CriticBatch batch{states, random_tensor({4, 1}, rng), next, {1, 0, 0.5, 1}, {0.9, 0.9, 0, 0.9}};
    NextActionSampler sampler = [](const Tensor& s, Rng& r) { return random_tensor({s.size(0), 1}, r); };
    auto out = critic_loss(critic, critic.params(), critic.target().params(), sampler, batch, 4, rng);
    tape.backward(out.loss);
  }
  double norm = 0.0;
  for (const auto& e : enc.entries())
    if (e.tensor.dim() == 4)
      for (double g : e.tensor.grad()) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("EMA update rules") {
  ParamSet online;
  online.add("w", Tensor::vector({1.0, 1.0}));
  ParamSet zeros;
  zeros.add("w", Tensor::vector({0.0, 0.0}));

  EmaTarget full(zeros, 1.0);
  full.update(online);
  CHECK(full.params().get("w").data()[0] == 1.0);

  EmaTarget frozen(zeros, 0.0);
  frozen.update(online);
  CHECK(frozen.params().get("w").data()[0] == 0.0);

  EmaTarget soft(zeros, 0.01);
  ema_update(soft, online);
  CHECK(soft.params().get("w").data()[1] == doctest::Approx(0.01).epsilon(1e-15));
  CHECK_FALSE(soft.params().get("w").is_same(online.get("w")));
}
