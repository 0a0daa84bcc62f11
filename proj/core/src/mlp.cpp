#include "ptaloc/mlp.hpp"

#include <cmath>
#include <random>

#include "ptaloc/error.hpp"
#include "ptaloc/kernels.hpp"

namespace ptaloc {

namespace {

void check_dims(std::span<const int> dims) {
  if (dims.size() < 2) throw Error("mlp needs at least an input and an output layer");
  for (int d : dims) {
    if (d < 1) throw Error("mlp layer widths must be positive");
  }
}

double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

}  // namespace

std::size_t MlpParams::num_parameters() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

std::vector<int> default_mlp_dims() { return {2, 64, 128, 64, 2}; }

MlpParams init_mlp(std::span<const int> dims, std::uint64_t seed, double range_bias_m) {
  check_dims(dims);
  if (dims.front() != 2 || dims.back() != 2) throw Error("estimator must map 2 features to 2 outputs");
  std::mt19937_64 rng(seed);
  MlpParams p;
  p.dims.assign(dims.begin(), dims.end());
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto in = static_cast<std::size_t>(dims[l]);
    const auto out = static_cast<std::size_t>(dims[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> w(in * out);
    for (auto& v : w) v = dist(rng);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(out, 0.0);
  }
  p.biases.back()[1] = inverse_softplus(range_bias_m);
  return p;
}

std::vector<PositionEstimate> mlp_forward(const MlpParams& params, std::span<const double> features,
                                          double angle_bound_rad) {
  if (features.size() % 2 != 0) throw Error("mlp_forward: features must be (K x 2)");
  const std::size_t K = features.size() / 2;
  std::vector<double> act(features.begin(), features.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    const auto in = static_cast<std::size_t>(params.dims[l]);
    const auto out = static_cast<std::size_t>(params.dims[l + 1]);
    next.assign(K * out, 0.0);
    kernels::matmul(act.data(), params.weights[l].data(), next.data(), K, in, out);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = 0; j < out; ++j) next[k * out + j] = next[k * out + j] + params.biases[l][j];
    }
    if (l + 1 < params.num_layers()) {
      for (auto& v : next) v = v > 0.0 ? v : 0.0;
    }
    act.swap(next);
  }
  std::vector<PositionEstimate> est(K);
  for (std::size_t k = 0; k < K; ++k) {
    auto& e = est[k];
    e.angle_rad = std::tanh(act[2 * k]) * angle_bound_rad;
    e.range_m = kernels::softplus(act[2 * k + 1]);
    e.x_m = e.range_m * std::cos(e.angle_rad);
    e.y_m = e.range_m * std::sin(e.angle_rad);
  }
  return est;
}

PositionEstimate mlp_forward(const MlpParams& params, double power_feature, double index_feature,
                             double angle_bound_rad) {
  const double f[2] = {power_feature, index_feature};
  return mlp_forward(params, f, angle_bound_rad).front();
}

TapedMlp make_taped_mlp(ad::Tape& tape, const MlpParams& params) {
  TapedMlp t;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    const auto in = static_cast<std::size_t>(params.dims[l]);
    const auto out = static_cast<std::size_t>(params.dims[l + 1]);
    t.weights.push_back(tape.parameter({in, out}, params.weights[l]));
    t.biases.push_back(tape.parameter({out}, params.biases[l]));
  }
  return t;
}

TapedEstimate taped_mlp_forward(const TapedMlp& mlp, const ad::Value& features, double angle_bound_rad) {
  ad::Value act = features;
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    act = ad::bias_add(ad::matmul(act, mlp.weights[l]), mlp.biases[l]);
    if (l + 1 < mlp.weights.size()) act = ad::relu(act);
  }
  TapedEstimate e;
  e.angle = ad::scale(ad::tanh(ad::column(act, 0)), angle_bound_rad);
  e.range = ad::softplus(ad::column(act, 1));
  e.x = ad::mul(e.range, ad::cos(e.angle));
  e.y = ad::mul(e.range, ad::sin(e.angle));
  return e;
}

std::size_t flops_count(std::span<const int> dims) {
  check_dims(dims);
  std::size_t ops = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto in = static_cast<std::size_t>(dims[l]);
    const auto out = static_cast<std::size_t>(dims[l + 1]);
    ops += 2 * in * out + out;
    if (l + 2 < dims.size()) ops += out;  // ReLU
  }
  return ops;
}

}  // namespace ptaloc
