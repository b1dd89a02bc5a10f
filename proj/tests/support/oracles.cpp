#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

namespace cp3er::testing {

Tensor random_tensor(const Shape& shape, Rng& rng, double scale, bool requires_grad) {
  Tensor t(shape);
  for (double& v : t.data()) v = scale * rng.normal();
  t.set_requires_grad(requires_grad);
  return t;
}

GradCheck check_gradients(const std::function<Tensor()>& loss, const std::vector<Tensor>& wrt, double step) {
  for (Tensor t : wrt) t.zero_grad();
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor l = loss();
    tape.backward(l);
  }
  GradCheck out;
  for (std::size_t w = 0; w < wrt.size(); ++w) {
    Tensor t = wrt[w];
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::ranges::copy(t.grad(), analytic.begin());
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double saved = t.data()[i];
      double plus = 0.0, minus = 0.0;
      {
        Tape::Pause pause;
        t.data()[i] = saved + step;
        plus = loss().item();
        t.data()[i] = saved - step;
        minus = loss().item();
      }
      t.data()[i] = saved;
      const double fd = (plus - minus) / (2.0 * step);
      const double err = std::abs(analytic[i] - fd) / (std::abs(fd) + 1e-8);
      out.max_abs_grad = std::max(out.max_abs_grad, std::abs(analytic[i]));
      ++out.entries;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = "tensor " + std::to_string(w) + "[" + std::to_string(i) + "] autodiff " +
                    std::to_string(analytic[i]) + " fd " + std::to_string(fd);
      }
    }
    t.zero_grad();
  }
  return out;
}

double ks_uniform_statistic(std::vector<double> samples, double lo, double hi) {
  std::ranges::sort(samples);
  const auto n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = std::clamp((samples[i] - lo) / (hi - lo), 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - cdf, cdf - static_cast<double>(i) / n});
  }
  return d;
}

double ks_p_value(double statistic, std::size_t n) {
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = 2.0 * ((j % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

double chi_square_p_value(std::span<const double> observed, std::span<const double> expected_probs) {
  const double total = std::accumulate(observed.begin(), observed.end(), 0.0);
  double stat = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double expected = total * expected_probs[i];
    if (expected <= 0.0) continue;
    stat += (observed[i] - expected) * (observed[i] - expected) / expected;
    ++cells;
  }
  if (cells < 2) return 1.0;
  boost::math::chi_squared dist(static_cast<double>(cells - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

std::optional<NStepOracle> brute_force_nstep(const std::vector<Transition>& history, std::size_t capacity,
                                             std::size_t logical_index, std::size_t n, double gamma) {
  const std::size_t stored = std::min(history.size(), capacity);
  const std::size_t first = history.size() - stored;
  const std::size_t start = first + logical_index;
  if (logical_index >= stored || n == 0) return std::nullopt;
  NStepOracle o;
  o.observation = history[start].observation;
  o.action = history[start].action;
  double discount = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t t = start + j;
    if (t >= history.size()) return std::nullopt;
    o.reward_sum += discount * history[t].reward;
    discount *= gamma;
    o.steps = j + 1;
    if (history[t].boundary) {
      o.next_observation = history[t].final_observation;
      o.discount = history[t].terminal ? 0.0 : discount;
      return o;
    }
  }
  if (start + n >= history.size()) return std::nullopt;
  o.next_observation = history[start + n].observation;
  o.discount = discount;
  return o;
}

}  // namespace cp3er::testing
