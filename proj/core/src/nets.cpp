#include "cp3er/nets.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace cp3er {

namespace {

std::string layer_name(std::size_t index, const char* field) {
  return "l" + std::to_string(index) + "." + field;
}

Tensor apply_activation(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::kRelu:
      return relu(x);
    case Activation::kTanh:
      return tanh(x);
    case Activation::kIdentity:
      break;
  }
  return x;
}

}  // namespace

void MlpSpec::validate() const {
  if (input_dim == 0 || output_dim == 0 || hidden_dim == 0) {
    throw DimensionError("MlpSpec: all dimensions must be positive");
  }
}

std::size_t MlpSpec::param_count() const {
  std::size_t total = 0;
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < num_hidden_layers; ++l) {
    total += (in + 1) * hidden_dim;
    in = hidden_dim;
  }
  return total + (in + 1) * output_dim;
}

std::vector<double> orthogonal_matrix(std::size_t rows, std::size_t cols, double gain, Rng& rng) {
  const std::size_t big = std::max(rows, cols), small = std::min(rows, cols);
  Eigen::MatrixXd gauss(big, small);
  for (Eigen::Index j = 0; j < gauss.cols(); ++j)
    for (Eigen::Index i = 0; i < gauss.rows(); ++i) gauss(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (std::size_t j = 0; j < small; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      out[i * cols + j] = gain * (rows >= cols ? q(i, j) : q(j, i));
  return out;
}

ParamSet init_mlp_params(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  ParamSet params;
  std::size_t in = spec.input_dim;
  for (std::size_t l = 0; l <= spec.num_hidden_layers; ++l) {
    const bool last = l == spec.num_hidden_layers;
    const std::size_t out = last ? spec.output_dim : spec.hidden_dim;
    std::vector<double> w = (last && spec.zero_final)
                                ? std::vector<double>(in * out, 0.0)
                                : orthogonal_matrix(in, out, last ? 1.0 : std::sqrt(2.0), rng);
    params.add(layer_name(l, "weight"), Tensor({in, out}, std::move(w), true));
    params.add(layer_name(l, "bias"), Tensor({out}, 0.0, true));
    in = out;
  }
  return params;
}

Tensor mlp_forward(const MlpSpec& spec, const ParamSet& params, const Tensor& x, MlpTrace* trace) {
  if (x.dim() != 2 || x.size(1) != spec.input_dim) {
    throw DimensionError("mlp_forward: expected [batch×" + std::to_string(spec.input_dim) +
                         "], got " + shape_str(x.shape()));
  }
  const auto& entries = params.entries();
  if (entries.size() != 2 * (spec.num_hidden_layers + 1)) {
    throw DimensionError("mlp_forward: parameter set does not match spec");
  }
  Tensor h = x;
  for (std::size_t l = 0; l < spec.num_hidden_layers; ++l) {
    Tensor pre = linear(h, entries[2 * l].tensor, entries[2 * l + 1].tensor);
    h = relu(pre);
    if (trace) {
      trace->pre_activations.push_back(pre);
      trace->activations.push_back(h);
    }
  }
  const std::size_t last = spec.num_hidden_layers;
  Tensor out = linear(h, entries[2 * last].tensor, entries[2 * last + 1].tensor);
  return apply_activation(out, spec.final_activation);
}

void ConvEncoderSpec::validate() const {
  if (channels == 0 || height == 0 || width == 0 || feature_dim == 0 || stages.empty()) {
    throw DimensionError("ConvEncoderSpec: dimensions must be positive");
  }
  conv_output_size();
}

std::size_t ConvEncoderSpec::conv_output_size() const {
  std::size_t c = channels, h = height, w = width;
  for (const auto& s : stages) {
    if (s.kernel == 0 || s.stride == 0 || s.out_channels == 0 || s.kernel > h || s.kernel > w) {
      throw DimensionError("ConvEncoderSpec: stage does not fit the input");
    }
    h = (h - s.kernel) / s.stride + 1;
    w = (w - s.kernel) / s.stride + 1;
    c = s.out_channels;
  }
  return c * h * w;
}

ParamSet init_encoder_params(const ConvEncoderSpec& spec, Rng& rng) {
  spec.validate();
  ParamSet params;
  std::size_t in_c = spec.channels;
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const auto& s = spec.stages[i];
    const std::size_t fan_in = in_c * s.kernel * s.kernel;
    params.add("conv" + std::to_string(i) + ".weight",
               Tensor({s.out_channels, in_c, s.kernel, s.kernel},
                      orthogonal_matrix(s.out_channels, fan_in, std::sqrt(2.0), rng), true));
    params.add("conv" + std::to_string(i) + ".bias", Tensor({s.out_channels}, 0.0, true));
    in_c = s.out_channels;
  }
  const std::size_t flat = spec.conv_output_size();
  params.add("proj.weight",
             Tensor({flat, spec.feature_dim}, orthogonal_matrix(flat, spec.feature_dim, 1.0, rng), true));
  params.add("proj.bias", Tensor({spec.feature_dim}, 0.0, true));
  return params;
}

Tensor encoder_forward(const ConvEncoderSpec& spec, const ParamSet& params, const Tensor& frames) {
  const bool single = frames.dim() == 3;
  const Shape expect{spec.channels, spec.height, spec.width};
  const Shape got = single ? frames.shape()
                           : (frames.dim() == 4 ? Shape(frames.shape().begin() + 1, frames.shape().end())
                                                : Shape{});
  if (got != expect) {
    throw DimensionError("encoder_forward: expected frames " + shape_str(expect) + ", got " +
                         shape_str(frames.shape()));
  }
  const auto& entries = params.entries();
  if (entries.size() != 2 * spec.stages.size() + 2) {
    throw DimensionError("encoder_forward: parameter set does not match spec");
  }
  const std::size_t batch = single ? 1 : frames.size(0);
  Tensor h = single ? reshape(frames, {1, spec.channels, spec.height, spec.width}) : frames;
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    h = relu(conv2d(h, entries[2 * i].tensor, spec.stages[i].stride, entries[2 * i + 1].tensor));
  }
  h = reshape(h, {batch, spec.conv_output_size()});
  const std::size_t last = 2 * spec.stages.size();
  return tanh(linear(h, entries[last].tensor, entries[last + 1].tensor));
}

EmaTarget::EmaTarget(const ParamSet& online, double rate)
    : shadow_(online.detached_copy()), rate_(rate) {
  if (rate < 0.0 || rate > 1.0) throw ContractError("EmaTarget: rate must lie in [0, 1]");
}

void EmaTarget::update(const ParamSet& online) {
  auto& dst = shadow_.entries();
  const auto& src = online.entries();
  if (dst.size() != src.size()) throw DimensionError("ema_update: parameter count mismatch");
  for (std::size_t p = 0; p < dst.size(); ++p) {
    if (dst[p].tensor.shape() != src[p].tensor.shape()) {
      throw DimensionError("ema_update: shape mismatch for " + dst[p].name);
    }
    auto t = dst[p].tensor.data();
    auto o = src[p].tensor.data();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - rate_) * t[i] + rate_ * o[i];
  }
}

void ema_update(EmaTarget& target, const ParamSet& online) { target.update(online); }

}  // namespace cp3er
