#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cp3er/diagnostics.hpp"
#include "oracles.hpp"

using namespace cp3er;
using cp3er::testing::random_tensor;

TEST_CASE("neuron scores") {
  CHECK(neuron_scores(Tensor::matrix({{0, 0.5}, {0, 1.5}})) == std::vector<double>{0, 2});
  CHECK(neuron_scores(Tensor::matrix({{0.3, 0.3, 0.3}})) == std::vector<double>{1, 1, 1});
  CHECK(neuron_scores(Tensor({4, 3}, 0.0)) == std::vector<double>{0, 0, 0});
}

TEST_CASE("dormant report counts") {
  const DormantReport r = dormant_report({Tensor::matrix({{0, 0.5}, {0, 1.5}})}, 0.025);
  CHECK(r.layers[0].dormant == 1);
  CHECK(r.ratio == 0.5);
  const DormantReport two = dormant_report({Tensor::matrix({{0, 1}}), Tensor::matrix({{1, 1, 1}})}, 0.025);
  CHECK(two.ratio == doctest::Approx(1.0 / 5.0));
}

TEST_CASE("fresh wide network is mostly awake") {
  MlpSpec spec{16, 1024, 2, 4};
  Rng rng(1);
  ParamSet p = init_mlp_params(spec, rng);
  const DormantReport r = dormant_ratio(spec, p, random_tensor({256, 16}, rng), 0.025);
  CHECK(r.layers.size() == 2);
  CHECK(r.ratio < 0.1);
}

TEST_CASE("all-zero network is fully dormant") {
  MlpSpec spec{4, 32, 2, 1};
  Rng rng(2);
  ParamSet p = init_mlp_params(spec, rng);
  for (auto& e : p.entries()) std::fill(e.tensor.data().begin(), e.tensor.data().end(), 0.0);
  CHECK(dormant_ratio(spec, p, random_tensor({32, 4}, rng), 0.025).ratio == 1.0);
}

TEST_CASE("consistency policy probe covers the hidden layers") {
  ConsistencyNet net(3, 2, 64, 2, NoiseSchedule{});
  Rng rng(3);
  ParamSet p = net.init_params(rng);
  const DormantReport r = dormant_ratio(net, p, random_tensor({128, 3}, rng), rng, 0.025);
  CHECK(r.layers.size() == 2);
  CHECK(r.probe_batch == 128);
  CHECK(r.ratio < 0.2);
}

TEST_CASE("metrics log writes the fixed header and blank optional cells") {
  const auto path = std::filesystem::temp_directory_path() / "cp3er_metrics_test.csv";
  {
    MetricsLog log(path, 1);
    MetricsRow a;
    a.step = 10;
    a.episode = 1;
    a.episode_return = 0.5;
    metrics_append(log, a);
    MetricsRow b;
    b.step = 20;
    b.critic_loss = 1.25;
    log.append(b);
    MetricsRow back;
    back.step = 15;
    CHECK_THROWS_AS(log.append(back), ContractError);
  }
  std::ifstream in(path);
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  CHECK(header == kMetricsHeader);
  CHECK(first == "10,1,0.5,,,,,,,,");
  CHECK(second == "20,0,,,,1.25,,,,,");
  std::filesystem::remove(path);
}
