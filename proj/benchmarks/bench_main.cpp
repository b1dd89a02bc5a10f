#include <benchmark/benchmark.h>

#include "cp3er/agent.hpp"
#include "cp3er/nets.hpp"
#include "cp3er/presets.hpp"
#include "cp3er/replay.hpp"

using namespace cp3er;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor a = random_tensor({n, n}, rng), b = random_tensor({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).data().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_MlpForwardBackward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  MlpSpec spec{52, hidden, 2, 6};
  ParamSet params = init_mlp_params(spec, rng);
  Tensor x = random_tensor({128, 52}, rng);
  for (auto _ : state) {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor loss = mean(square(mlp_forward(spec, params, x)));
    tape.backward(loss);
    params.zero_grad();
  }
}
BENCHMARK(BM_MlpForwardBackward)->Arg(128)->Arg(256)->Arg(1024);

void BM_EncoderForwardBackward(benchmark::State& state) {
  Rng rng(3);
  ConvEncoderSpec spec;
  ParamSet params = init_encoder_params(spec, rng);
  Tensor frames = random_tensor({static_cast<std::size_t>(state.range(0)), 3, 32, 32}, rng);
  for (auto _ : state) {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor loss = mean(encoder_forward(spec, params, frames));
    tape.backward(loss);
    params.zero_grad();
  }
}
BENCHMARK(BM_EncoderForwardBackward)->Arg(64)->Arg(128);

void BM_SamplePpe(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  ReplayBuffer buffer(size, 1, 1);
  for (std::size_t i = 0; i < size; ++i) {
    Transition t;
    t.observation = {0.0};
    t.action = {0.0};
    t.boundary = t.terminal = true;
    t.final_observation = {0.0};
    t.insert_step = i + 1;
    buffer.push(std::move(t));
  }
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(buffer.sample_ppe(2.0, 256, rng).data());
}
BENCHMARK(BM_SamplePpe)->Arg(10000)->Arg(100000);

void BM_AgentUpdate(benchmark::State& state) {
  Config config = state.range(0) == 0 ? bandit_base_config() : pixels_base_config();
  auto env = make_env(config.env, 1, config.action_repeat, config.frame_stack);
  Rng rng(5);
  Agent agent(config, env->spec(), rng);
  ReplayBuffer buffer(config.capacity, env->spec().observation_size(), env->spec().action_dim);
  std::vector<double> obs = env->reset();
  for (std::uint64_t step = 1; step <= 2000; ++step) {
    std::vector<double> a = agent.act(obs, rng, true);
    StepResult r = env->step(a);
    Transition t{obs, a, r.reward, r.done, r.terminal, r.done ? r.observation : std::vector<double>{}, step};
    buffer.push(std::move(t));
    obs = r.done ? env->reset() : r.observation;
  }
  for (auto _ : state) benchmark::DoNotOptimize(agent.update(buffer, rng).critic_loss);
  state.SetLabel(config.env);
}
BENCHMARK(BM_AgentUpdate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
