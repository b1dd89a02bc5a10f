#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "cp3er/actor.hpp"
#include "cp3er/critic.hpp"
#include "cp3er/optim.hpp"
#include "oracles.hpp"

using namespace cp3er;
using cp3er::testing::check_gradients;
using cp3er::testing::chi_square_p_value;
using cp3er::testing::random_tensor;

namespace {

double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

CriticOptions small(std::size_t hidden = 16) {
  CriticOptions o;
  o.hidden_dim = hidden;
  o.target_samples = 8;
  return o;
}

}  // namespace

TEST_CASE("zero-initialized critic output") {
  CriticOptions o = small();
  o.zero_final = true;
  Rng rng(1);
  Critic critic(3, 2, o, rng);
  MogBatch d = critic.forward(random_tensor({4, 3}, rng), random_tensor({4, 2}, rng));
  for (std::size_t r = 0; r < 4; ++r) {
    const MoGParams p = d.row(r);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(p.weights[j] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
      CHECK(p.means[j] == 0.0);
      CHECK(p.stds[j] == doctest::Approx(std::log(2.0) + kMogStdFloor).epsilon(1e-14));
    }
  }
}

TEST_CASE("mixture weights always normalize") {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    MogBatch d = mog_from_raw(random_tensor({5, 9}, rng, 10.0), 3);
    for (std::size_t r = 0; r < 5; ++r) {
      const auto w = d.row(r).weights;
      CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("critic output depends on the action") {
  Rng rng(3);
  Critic critic(3, 2, small(), rng);
  for (int i = 0; i < 5; ++i) {
    Tensor s = random_tensor({2, 3}, rng);
    Tensor a = random_tensor({2, 2}, rng, 0.5, true);
    Tape tape;
    {
      Tape::Scope scope(tape);
      tape.backward(sum(q_mean(critic.forward(s, a))));
    }
    double norm = 0.0;
    for (double g : a.grad()) norm += g * g;
    CHECK(norm > 0.0);
  }
}

TEST_CASE("scalar mixture log-density") {
  MoGParams single{{1, 0, 0}, {0.4, 3, -2}, {0.7, 1, 1}};
  CHECK(mog_log_prob(single, 0.4) == doctest::Approx(-std::log(0.7 * std::sqrt(2 * std::numbers::pi))).epsilon(1e-14));

  MoGParams sym{{0.5, 0.5}, {-1, 1}, {0.5, 0.5}};
  CHECK(mog_log_prob(sym, 0.0) == doctest::Approx(std::log(normal_pdf(0.0, -1, 0.5))).epsilon(1e-14));

  MoGParams mix{{0.2, 0.5, 0.3}, {-1, 0.5, 2}, {0.3, 0.8, 0.4}};
  const double lo = -1 - 10 * 0.8, hi = 2 + 10 * 0.8;
  const int steps = 200000;
  const double h = (hi - lo) / steps;
  double integral = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    integral += w * std::exp(mog_log_prob(mix, lo + i * h)) * h;
  }
  CHECK(std::abs(integral - 1.0) < 1e-4);
}

TEST_CASE("mixture sampling") {
  Rng rng(4);
  SUBCASE("floor-width components return their means") {
    MoGParams tight{{0.5, 0.5}, {-3, 4}, {1e-300, 1e-300}};
    for (double x : mog_sample(tight, rng, 100)) CHECK((x == -3.0 || x == 4.0));
  }
  SUBCASE("Monte Carlo mean and component frequencies") {
    MoGParams mix{{0.2, 0.5, 0.3}, {-1, 0.5, 2}, {0.3, 0.8, 0.4}};
    const std::size_t n = 100000;
    const auto xs = mog_sample(mix, rng, n);
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    CHECK(std::abs(mean - mix.mean()) < 3.0 * std::sqrt(mix.variance() / n));

    // Degenerate components at 0, 1, 2 expose which one was drawn.
    Rng comp_rng(5);
    std::vector<double> observed(3, 0.0);
    MoGParams marker{mix.weights, {0, 1, 2}, {1e-300, 1e-300, 1e-300}};
    for (double x : mog_sample(marker, comp_rng, n)) observed[static_cast<std::size_t>(x)] += 1.0;
    CHECK(chi_square_p_value(observed, mix.weights) > 0.01);
  }
}

TEST_CASE("q_mean fixed values and gradient") {
  MogBatch one{Tensor::matrix({{0, -1e300, -1e300}}), Tensor::matrix({{5, 7, 9}}), Tensor::matrix({{1, 1, 1}})};
  CHECK(q_mean(one).item() == 5.0);
  const double lw = std::log(1.0 / 3.0);
  MogBatch uni{Tensor::matrix({{lw, lw, lw}}), Tensor::matrix({{0, 3, 6}}), Tensor::matrix({{1, 1, 1}})};
  CHECK(q_mean(uni).item() == doctest::Approx(3.0).epsilon(1e-14));

  Rng rng(6);
  Tensor raw = random_tensor({3, 9}, rng, 1.0, true);
  const auto g = check_gradients([&] { return sum(q_mean(mog_from_raw(raw, 3))); }, {raw});
  CHECK(g.max_rel_error < 1e-4);
}

TEST_CASE("gamma zero reduces to reward likelihood") {
  Rng rng(7);
  Critic critic(2, 1, small(32), rng);
  AdamOptions ao;
  ao.lr = 3e-3;
  Adam opt(critic.params(), ao);
  Tensor states({64, 2}, 0.0), actions({64, 1}, 0.0);
  NextActionSampler never = [](const Tensor& s, Rng&) { return Tensor({s.size(0), 1}); };
  for (int step = 0; step < 1500; ++step) {
    CriticBatch batch{states, actions, states, std::vector<double>(64), std::vector<double>(64, 0.0)};
    for (double& r : batch.reward_sums) r = rng.uniform() < 0.5 ? -1.0 : 1.0;
    Tape tape;
    Tape::Scope scope(tape);
    auto out = critic_loss(critic, critic.params(), critic.target().params(), never, batch, 8, rng);
    for (std::size_t i = 0; i < 64; ++i) CHECK(out.targets.at(i, 0) == batch.reward_sums[i]);
    tape.backward(out.loss);
    opt.step();
  }
  Tape::Pause pause;
  const MoGParams fit = critic.forward(Tensor({1, 2}), Tensor({1, 1})).row(0);
  CHECK(fit.mean() == doctest::Approx(0.0).epsilon(0.1).scale(1.0));
  CHECK(fit.variance() == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("sample count does not bias the critic loss") {
  Rng rng(8);
  Critic critic(2, 1, small(), rng);
  Tensor states = random_tensor({16, 2}, rng), actions = random_tensor({16, 1}, rng, 0.5);
  Tensor next = random_tensor({16, 2}, rng);
  CriticBatch batch{states, actions, next, std::vector<double>(16, 0.3), std::vector<double>(16, 0.97)};
  NextActionSampler sampler = [](const Tensor& s, Rng& r) { return uniform_actions(s.size(0), 1, r); };
  Tape::Pause pause;
  auto estimates = [&](std::size_t m) {
    std::vector<double> v;
    for (int i = 0; i < 100; ++i) v.push_back(critic_loss(critic, critic.params(), critic.target().params(), sampler, batch, m, rng).loss.item());
    return v;
  };
  const auto a = estimates(10), b = estimates(20);
  auto stats = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, s / (v.size() - 1) / v.size()};
  };
  const auto [ma, va] = stats(a);
  const auto [mb, vb] = stats(b);
  CHECK(std::abs(ma - mb) < 4.0 * std::sqrt(va + vb));
}

TEST_CASE("terminal rows do not bootstrap") {
  Rng rng(9);
  Critic critic(2, 1, small(), rng);
  CriticBatch batch{random_tensor({2, 2}, rng), random_tensor({2, 1}, rng), random_tensor({2, 2}, rng), {0.7, -0.2}, {0.0, 0.0}};
  NextActionSampler sampler = [](const Tensor& s, Rng& r) { return uniform_actions(s.size(0), 1, r); };
  auto out = critic_loss(critic, critic.params(), critic.target().params(), sampler, batch, 5, rng);
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(out.targets.at(0, j) == 0.7);
    CHECK(out.targets.at(1, j) == -0.2);
  }
}
