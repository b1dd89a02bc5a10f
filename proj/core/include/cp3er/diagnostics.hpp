#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "cp3er/consistency.hpp"
#include "cp3er/ndgrad.hpp"
#include "cp3er/nets.hpp"
#include "cp3er/rng.hpp"

namespace cp3er {

// s_i = mean_batch |h_i| / ((1/N) Σ_k mean_batch |h_k|); all zeros when the layer is silent.
std::vector<double> neuron_scores(const Tensor& activations);

struct LayerDormancy {
  std::size_t neurons = 0;
  std::size_t dormant = 0;
  std::vector<double> scores;
};

struct DormantReport {
  std::vector<LayerDormancy> layers;
  double ratio = 0.0;
  double threshold = 0.0;
  std::size_t probe_batch = 0;
};

// Aggregates per-layer activations [batch×N^l] into Σ H^l / Σ N^l.
DormantReport dormant_report(const std::vector<Tensor>& layer_activations, double threshold);

// Probes every hidden (post-relu) layer of an MLP on the given inputs.
DormantReport dormant_ratio(const MlpSpec& spec, const ParamSet& params, const Tensor& probe_inputs,
                            double threshold);

// Consistency policy probe: states paired with fresh a^K ~ N(0, K²I) at τ = K.
DormantReport dormant_ratio(const ConsistencyNet& net, const ParamSet& params,
                            const Tensor& probe_states, Rng& rng, double threshold);

inline constexpr const char* kMetricsHeader =
    "step,episode,return,success,actor_loss,critic_loss,consistency_loss,q_mean,dormant_ratio,beta_mean,fps";

struct MetricsRow {
  std::uint64_t step = 0;
  std::uint64_t episode = 0;
  std::optional<double> episode_return;
  std::optional<double> success;
  std::optional<double> actor_loss;
  std::optional<double> critic_loss;
  std::optional<double> consistency_loss;
  std::optional<double> q_mean;
  std::optional<double> dormant_ratio;
  std::optional<double> beta_mean;
  std::optional<double> fps;
};

std::string format_metrics_row(const MetricsRow& row);

class MetricsIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Buffered CSV writer; rows are flushed every `flush_every` appends and on destruction.
class MetricsLog {
 public:
  explicit MetricsLog(std::filesystem::path path, std::size_t flush_every = 16);
  ~MetricsLog();
  MetricsLog(const MetricsLog&) = delete;
  MetricsLog& operator=(const MetricsLog&) = delete;

  void append(const MetricsRow& row);
  void flush();

  const std::filesystem::path& path() const { return path_; }
  std::size_t rows_written() const { return written_; }
  const std::vector<MetricsRow>& history() const { return history_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t flush_every_;
  std::vector<std::string> pending_;
  std::vector<MetricsRow> history_;
  std::size_t written_ = 0;
  std::uint64_t last_step_ = 0;
};

void metrics_append(MetricsLog& log, const MetricsRow& row);

}  // namespace cp3er
