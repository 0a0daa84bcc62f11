#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ptaloc/autodiff.hpp"
#include "ptaloc/feedback.hpp"

namespace ptaloc {

/// Fully connected estimator. Layer l maps dims[l] -> dims[l+1]; hidden
/// layers use ReLU, the final 2-vector feeds the angle and range heads.
struct MlpParams {
  std::vector<int> dims;
  std::vector<std::vector<double>> weights;  // dims[l] x dims[l+1], row-major
  std::vector<std::vector<double>> biases;   // dims[l+1]

  std::size_t num_layers() const { return weights.size(); }
  std::size_t num_parameters() const;
};

/// Default widths 2 -> 64 -> 128 -> 64 -> 2.
std::vector<int> default_mlp_dims();

/// He-style uniform fan-in init, zero biases, range-head bias set to
/// softplus^-1(range_bias_m).
MlpParams init_mlp(std::span<const int> dims, std::uint64_t seed, double range_bias_m);

struct PositionEstimate {
  double angle_rad = 0.0;
  double range_m = 0.0;
  double x_m = 0.0;
  double y_m = 0.0;
};

/// Affine maps taking (power dBm, subcarrier index) to roughly [-1, 1].
struct FeatureScaling {
  PowerRange power;
  int num_subcarriers = 2;

  double power_scale() const { return 2.0 / (power.hi_dbm - power.lo_dbm); }
  double power_shift() const { return -2.0 * power.lo_dbm / (power.hi_dbm - power.lo_dbm) - 1.0; }
  double index_scale() const { return 2.0 / num_subcarriers; }
  double index_shift() const { return -static_cast<double>(num_subcarriers + 1) / num_subcarriers; }

  double power_feature(double dbm) const { return dbm * power_scale() + power_shift(); }
  double index_feature(double index) const { return index * index_scale() + index_shift(); }
};

/// angle = bound * tanh(v1), range = softplus(v2), Cartesian from polar.
/// `features` is (K x 2) row-major: [power_feature, index_feature].
std::vector<PositionEstimate> mlp_forward(const MlpParams& params, std::span<const double> features,
                                          double angle_bound_rad);

PositionEstimate mlp_forward(const MlpParams& params, double power_feature, double index_feature,
                             double angle_bound_rad);

/// Leaves for every weight and bias, in layer order (w0, b0, w1, b1, ...).
struct TapedMlp {
  std::vector<ad::Value> weights;
  std::vector<ad::Value> biases;
};

TapedMlp make_taped_mlp(ad::Tape& tape, const MlpParams& params);

struct TapedEstimate {
  ad::Value angle;
  ad::Value range;
  ad::Value x;
  ad::Value y;
};

TapedEstimate taped_mlp_forward(const TapedMlp& mlp, const ad::Value& features, double angle_bound_rad);

/// Operation count for one forward pass:
///   per layer 2 * in * out (multiply + add per weight) + out (bias adds),
///   plus one ReLU evaluation per hidden unit. Output heads are not counted.
/// For 2-64-128-64-2 this is 33 280 + 258 + 256 = 33 794.
std::size_t flops_count(std::span<const int> dims);

}  // namespace ptaloc
