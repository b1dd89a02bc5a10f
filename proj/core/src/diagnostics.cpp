#include "cp3er/diagnostics.hpp"

#include <cmath>
#include <cstdio>

namespace cp3er {

std::vector<double> neuron_scores(const Tensor& activations) {
  if (activations.dim() != 2) throw DimensionError("neuron_scores: expected [batch×N]");
  const std::size_t batch = activations.size(0), n = activations.size(1);
  if (batch == 0) throw ContractError("neuron_scores: empty batch");
  std::vector<double> mean_abs(n, 0.0);
  auto h = activations.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < n; ++i) mean_abs[i] += std::abs(h[b * n + i]);
  double layer_mean = 0.0;
  for (double& v : mean_abs) {
    v /= static_cast<double>(batch);
    layer_mean += v;
  }
  layer_mean /= static_cast<double>(n);
  std::vector<double> scores(n, 0.0);
  if (layer_mean == 0.0) return scores;
  for (std::size_t i = 0; i < n; ++i) scores[i] = mean_abs[i] / layer_mean;
  return scores;
}

DormantReport dormant_report(const std::vector<Tensor>& layer_activations, double threshold) {
  DormantReport report;
  report.threshold = threshold;
  std::size_t total = 0, dormant = 0;
  for (const Tensor& act : layer_activations) {
    LayerDormancy layer;
    layer.scores = neuron_scores(act);
    layer.neurons = layer.scores.size();
    for (double s : layer.scores) layer.dormant += s < threshold ? 1 : 0;
    total += layer.neurons;
    dormant += layer.dormant;
    report.probe_batch = act.size(0);
    report.layers.push_back(std::move(layer));
  }
  report.ratio = total ? static_cast<double>(dormant) / static_cast<double>(total) : 0.0;
  return report;
}

DormantReport dormant_ratio(const MlpSpec& spec, const ParamSet& params, const Tensor& probe_inputs,
                            double threshold) {
  Tape::Pause pause;
  MlpTrace trace;
  mlp_forward(spec, params, probe_inputs, &trace);
  return dormant_report(trace.activations, threshold);
}

DormantReport dormant_ratio(const ConsistencyNet& net, const ParamSet& params,
                            const Tensor& probe_states, Rng& rng, double threshold) {
  Tape::Pause pause;
  const std::size_t rows = probe_states.size(0);
  const double k = net.schedule().max_time;
  std::vector<double> noise(rows * net.action_dim());
  for (double& v : noise) v = k * rng.normal();
  std::vector<double> taus(rows, k);
  MlpTrace trace;
  net.network(params, probe_states, Tensor({rows, net.action_dim()}, std::move(noise)), taus, &trace);
  return dormant_report(trace.activations, threshold);
}

namespace {

void put_field(std::string& line, const std::optional<double>& value) {
  line += ',';
  if (!value) return;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", *value);
  line += buf;
}

}  // namespace

std::string format_metrics_row(const MetricsRow& row) {
  std::string line = std::to_string(row.step);
  line += ',';
  line += std::to_string(row.episode);
  put_field(line, row.episode_return);
  put_field(line, row.success);
  put_field(line, row.actor_loss);
  put_field(line, row.critic_loss);
  put_field(line, row.consistency_loss);
  put_field(line, row.q_mean);
  put_field(line, row.dormant_ratio);
  put_field(line, row.beta_mean);
  put_field(line, row.fps);
  return line;
}

MetricsLog::MetricsLog(std::filesystem::path path, std::size_t flush_every)
    : path_(std::move(path)), out_(path_, std::ios::trunc), flush_every_(std::max<std::size_t>(1, flush_every)) {
  if (!out_) throw MetricsIoError("metrics: cannot open " + path_.string());
  out_ << kMetricsHeader << '\n';
  if (!out_) throw MetricsIoError("metrics: write failed for " + path_.string());
}

MetricsLog::~MetricsLog() {
  try {
    flush();
  } catch (...) {
  }
}

void MetricsLog::append(const MetricsRow& row) {
  if (!history_.empty() && row.step < last_step_) {
    throw ContractError("metrics_append: step must be non-decreasing");
  }
  last_step_ = row.step;
  history_.push_back(row);
  pending_.push_back(format_metrics_row(row));
  if (pending_.size() >= flush_every_) flush();
}

void MetricsLog::flush() {
  for (const auto& line : pending_) out_ << line << '\n';
  written_ += pending_.size();
  pending_.clear();
  out_.flush();
  if (!out_) throw MetricsIoError("metrics: write failed for " + path_.string());
}

void metrics_append(MetricsLog& log, const MetricsRow& row) { log.append(row); }

}  // namespace cp3er
