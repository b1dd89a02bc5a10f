#include <doctest.h>

#include <cmath>

#include "cp3er/actor.hpp"
#include "cp3er/critic.hpp"
#include "cp3er/optim.hpp"
#include "oracles.hpp"

using namespace cp3er;
using cp3er::testing::check_gradients;
using cp3er::testing::ks_p_value;
using cp3er::testing::ks_uniform_statistic;
using cp3er::testing::random_tensor;

namespace {

ConsistencyActorOptions small_actor(double eta = 0.05) {
  ConsistencyActorOptions o;
  o.hidden_dim = 32;
  o.eta = eta;
  return o;
}

CriticOptions small_critic() {
  CriticOptions o;
  o.hidden_dim = 16;
  o.target_samples = 4;
  return o;
}

// Overwrites the critic's output layer so Q(s, a) = c for every input.
void make_constant_critic(Critic& critic, double c) {
  auto& entries = critic.params().entries();
  std::fill(entries[entries.size() - 2].tensor.data().begin(), entries[entries.size() - 2].tensor.data().end(), 0.0);
  Tensor& bias = entries.back().tensor;
  const std::size_t comps = critic.options().components;
  std::fill(bias.data().begin(), bias.data().end(), 0.0);
  for (std::size_t j = 0; j < comps; ++j) bias.data()[comps + j] = c;
}

double mean_abs(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += std::abs(v);
  return s / static_cast<double>(t.numel());
}

}  // namespace

TEST_CASE("exploration actions are uniform on the box") {
  Rng rng(1);
  ConsistencyActor actor(2, 1, small_actor(), rng);
  Tensor states({10000, 2}, 0.0);
  Tensor a = act(actor, states, rng, true);
  std::vector<double> draws(a.data().begin(), a.data().end());
  CHECK(ks_p_value(ks_uniform_statistic(draws, -1.0, 1.0), draws.size()) > 0.01);
}

TEST_CASE("policy actions are reproducible and sized to the env") {
  Rng rng(2);
  ConsistencyActor actor(3, 2, small_actor(), rng);
  Tensor states = random_tensor({4, 3}, rng);
  Rng r1(5), r2(5);
  Tensor a = act(actor, states, r1, false), b = act(actor, states, r2, false);
  CHECK(a.shape() == Shape{4, 2});
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("q_loss against a constant critic") {
  Rng rng(3);
  ConsistencyActor actor(2, 2, small_actor(), rng);
  Critic critic(2, 2, small_critic(), rng);
  make_constant_critic(critic, 1.5);
  Tensor states = random_tensor({6, 2}, rng);
  Tape tape;
  {
    Tape::Scope scope(tape);
    Tensor loss = q_loss(actor, critic, states, rng);
    CHECK(loss.item() == doctest::Approx(-1.5).epsilon(1e-12));
    tape.backward(loss);
  }
  CHECK(actor.params().grad_norm() == 0.0);
  CHECK_FALSE(critic.params().entries().front().tensor.has_grad());
}

TEST_CASE("q_loss pushes actions toward the maximizer of -|a|^2") {
  Rng rng(4);
  ConsistencyActor actor(1, 2, small_actor(), rng);
  // Critic trained to predict -|a|^2 as its single-component mean.
  CriticOptions co = small_critic();
  co.hidden_dim = 64;
  Critic critic(1, 2, co, rng);
  AdamOptions fit;
  fit.lr = 3e-3;
  Adam critic_opt(critic.params(), fit);
  Tensor states({64, 1}, 0.0);
  for (int step = 0; step < 1500; ++step) {
    Tensor a = cp3er::uniform_actions(64, 2, rng);
    Tensor target({64, 1});
    for (std::size_t i = 0; i < 64; ++i) target.data()[i] = -(a.at(i, 0) * a.at(i, 0) + a.at(i, 1) * a.at(i, 1));
    Tape tape;
    Tape::Scope scope(tape);
    tape.backward(mean(square(sub(q_mean(critic.forward(states, a)), target))));
    critic_opt.step();
  }
  AdamOptions ao;
  ao.lr = 1e-3;
  Adam actor_opt(actor.params(), ao);
  Rng probe(9);
  const double before = mean_abs(actor.sample(states, probe));
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 200; ++step) {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor loss = q_loss(actor, critic, states, rng);
    if (step == 0) first = loss.item();
    last = loss.item();
    tape.backward(loss);
    actor_opt.step();
  }
  Rng probe2(9);
  CHECK(last < first);
  CHECK(mean_abs(actor.sample(states, probe2)) < before);
}

TEST_CASE("q_loss gradient matches finite differences") {
  Rng rng(5);
  ConsistencyActorOptions o = small_actor();
  o.hidden_dim = 6;
  ConsistencyActor actor(2, 1, o, rng);
  Critic critic(2, 1, small_critic(), rng);
  Tensor states = random_tensor({3, 2}, rng);
  std::vector<Tensor> wrt;
  for (const auto& e : actor.params().entries()) wrt.push_back(e.tensor);
  const auto g = check_gradients([&] {
    Rng r(77);
    return q_loss(actor, critic, states, r);
  }, wrt);
  CHECK(g.max_rel_error < 1e-3);
}

TEST_CASE("regularized loss identities") {
  Rng rng(6);
  Critic critic(2, 2, small_critic(), rng);
  Tensor states = random_tensor({5, 2}, rng);
  Tensor reg = uniform_actions(5, 2, rng);

  ConsistencyActor plain(2, 2, small_actor(0.0), rng);
  {
    Rng r1(1), r2(1);
    const double total = regularized_loss(plain, critic, states, states, reg, r1).total.item();
    CHECK(total == q_loss(plain, critic, states, r2).item());
  }
  ConsistencyActor mixed(2, 2, small_actor(0.3), rng);
  Rng r1(2), r2(2);
  ActorLoss l = regularized_loss(mixed, critic, states, states, reg, r1);
  const double q = q_loss(mixed, critic, states, r2).item();
  const double c = actor_consistency_loss(mixed, states, reg, r2).item();
  CHECK(l.q_loss == q);
  CHECK(l.consistency_loss == c);
  CHECK(l.total.item() == doctest::Approx(q + 0.3 * c).epsilon(1e-14));
}

TEST_CASE("very large eta clones the proxy actions") {
  Rng rng(7);
  ConsistencyActor actor(1, 1, small_actor(1e6), rng);
  Critic critic(1, 1, small_critic(), rng);
  AdamOptions ao;
  ao.lr = 1e-3;
  ao.max_grad_norm = 0.0;
  Adam opt(actor.params(), ao);
  // Fixed dataset: action = 0.5·state.
  Tensor states({64, 1});
  for (std::size_t i = 0; i < 64; ++i) states.data()[i] = -1.0 + 2.0 * static_cast<double>(i) / 63.0;
  Tensor proxy = scale(states, 0.5);
  for (int step = 0; step < 1500; ++step) {
    Tape tape;
    Tape::Scope scope(tape);
    tape.backward(regularized_loss(actor, critic, states, states, proxy, rng).total);
    opt.step();
    actor.target().update(actor.params());
  }
  Tensor sampled = actor.sample(states, rng);
  double dist = 0.0;
  for (std::size_t i = 0; i < 64; ++i) dist += std::abs(sampled.data()[i] - proxy.data()[i]) / 64.0;
  CHECK(dist < 0.1);
}

TEST_CASE("Gaussian max-entropy actor") {
  GaussianActorOptions go;
  go.hidden_dim = 16;
  SUBCASE("temperature zero is pure Q maximization") {
    go.temperature = 0.0;
    Rng rng(8);
    GaussianActor actor(2, 1, go, rng);
    Critic critic(2, 1, small_critic(), rng);
    Tensor states = random_tensor({4, 2}, rng);
    Rng r1(3), r2(3);
    CHECK(gaussian_maxent_loss(actor, critic, states, r1).item() ==
          doctest::Approx(q_loss(actor, critic, states, r2).item()).epsilon(1e-14));
  }
  SUBCASE("zero critic raises the log-std") {
    go.temperature = 0.1;
    Rng rng(9);
    GaussianActor actor(1, 1, go, rng);
    Critic critic(1, 1, small_critic(), rng);
    make_constant_critic(critic, 0.0);
    Tensor states({32, 1}, 0.0);
    auto log_std = [&] {
      Tape::Pause pause;
      return actor.draw(states, rng).log_stds.data()[0];
    };
    const double before = log_std();
    AdamOptions ao;
    ao.lr = 1e-2;
    Adam opt(actor.params(), ao);
    for (int step = 0; step < 300; ++step) {
      Tape tape;
      Tape::Scope scope(tape);
      tape.backward(gaussian_maxent_loss(actor, critic, states, rng));
      opt.step();
    }
    CHECK(log_std() > before + 0.1);
  }
  SUBCASE("tanh log-density matches a histogram estimate") {
    const double mu = 0.3, log_std = -0.5;
    Rng rng(10);
    const std::size_t n = 400000, bins = 40;
    std::vector<double> counts(bins, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::tanh(mu + std::exp(log_std) * rng.normal());
      const auto b = static_cast<std::size_t>((a + 1.0) / 2.0 * bins);
      if (b < bins) counts[b] += 1.0;
    }
    const double width = 2.0 / bins;
    for (std::size_t b = 8; b < 32; ++b) {
      const double centre = -1.0 + width * (static_cast<double>(b) + 0.5);
      const double empirical = counts[b] / (n * width);
      CHECK(std::exp(GaussianActor::log_prob(centre, mu, log_std)) == doctest::Approx(empirical).epsilon(0.05));
    }
  }
}
