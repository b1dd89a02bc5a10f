#pragma once

#include <cstddef>
#include <vector>

#include "cp3er/ndgrad.hpp"
#include "cp3er/optim.hpp"
#include "cp3er/rng.hpp"

namespace cp3er {

enum class Activation { kIdentity, kRelu, kTanh };

// Fully-connected trunk with relu hidden layers.
struct MlpSpec {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 1024;
  std::size_t num_hidden_layers = 2;
  std::size_t output_dim = 0;
  Activation final_activation = Activation::kIdentity;
  // Initialize the output layer to zero instead of orthogonally.
  bool zero_final = false;

  void validate() const;
  // Σ over layers of (in + 1)·out.
  std::size_t param_count() const;
};

// Per-hidden-layer tensors captured during a forward pass.
struct MlpTrace {
  std::vector<Tensor> pre_activations;
  std::vector<Tensor> activations;
};

// Orthogonal weights (gain √2 on relu layers, 1 on the output layer), zero biases.
ParamSet init_mlp_params(const MlpSpec& spec, Rng& rng);
Tensor mlp_forward(const MlpSpec& spec, const ParamSet& params, const Tensor& x,
                   MlpTrace* trace = nullptr);

struct ConvStage {
  std::size_t out_channels;
  std::size_t kernel;
  std::size_t stride;
};

struct ConvEncoderSpec {
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::vector<ConvStage> stages{{16, 3, 2}, {32, 3, 2}};
  std::size_t feature_dim = 50;

  void validate() const;
  // Flattened size after the last conv stage.
  std::size_t conv_output_size() const;
};

ParamSet init_encoder_params(const ConvEncoderSpec& spec, Rng& rng);
// frames [batch×c×h×w] → features [batch×feature_dim] in (−1, 1).
Tensor encoder_forward(const ConvEncoderSpec& spec, const ParamSet& params, const Tensor& frames);

// Orthogonal matrix of the given shape (rows×cols) scaled by gain.
std::vector<double> orthogonal_matrix(std::size_t rows, std::size_t cols, double gain, Rng& rng);

// Shadow copy of a parameter set updated by soft interpolation.
class EmaTarget {
 public:
  EmaTarget(const ParamSet& online, double rate);

  // shadow ← (1 − rate)·shadow + rate·online
  void update(const ParamSet& online);
  void hard_update(const ParamSet& online) { shadow_.copy_from(online); }

  double rate() const { return rate_; }
  const ParamSet& params() const { return shadow_; }
  ParamSet& params() { return shadow_; }

 private:
  ParamSet shadow_;
  double rate_;
};

void ema_update(EmaTarget& target, const ParamSet& online);

}  // namespace cp3er
