#pragma once

// Shared fixtures: a toy configuration small enough for exhaustive
// finite-difference checks, and the full training loss as a plain function
// of every trainable parameter.

#include <cmath>
#include <functional>
#include <vector>

#include "ptaloc/beamformer.hpp"
#include "ptaloc/dataset.hpp"
#include "ptaloc/pipeline.hpp"

namespace ptaloc::testing {

/// N=4, M=8 on a 1 GHz carrier with 10 MHz spacing. The coarse grid keeps the
/// phases well conditioned for central differences.
inline SystemConfig toy_config() {
  SystemConfig cfg;
  cfg.carrier_freq_hz = 1e9;
  cfg.subcarrier_spacing_hz = 10e6;
  cfg.num_antennas = 4;
  cfg.num_subcarriers = 8;
  cfg.bandwidth_hz = 8 * cfg.subcarrier_spacing_hz;
  cfg.range_min_m = 2.0;
  cfg.range_max_m = 20.0;
  validate(cfg);
  return cfg;
}

/// Every trainable scalar, flattened: carrier phases, delay units, then each
/// layer's weights and biases.
struct FlatParams {
  BeamCoordinates beam;
  MlpParams mlp;

  std::vector<double*> slots() {
    std::vector<double*> s;
    for (auto& v : beam.carrier_phase) s.push_back(&v);
    for (auto& v : beam.delay_units) s.push_back(&v);
    for (std::size_t l = 0; l < mlp.num_layers(); ++l) {
      for (auto& v : mlp.weights[l]) s.push_back(&v);
      for (auto& v : mlp.biases[l]) s.push_back(&v);
    }
    return s;
  }
};

struct LossProblem {
  SystemConfig cfg;
  DerivedGrids grids;
  std::vector<UserPosition> users;
  std::vector<std::uint64_t> seeds;
  FeatureScaling scaling;
  PowerRange quantizer;
  FeedbackPath path = FeedbackPath::soft;

  /// Training loss and, when `grad` is non-null, its gradient in slot order.
  double loss(FlatParams& p, std::vector<double>* grad) const {
    ad::Tape tape;
    const auto cp = tape.parameter({p.beam.carrier_phase.size()}, p.beam.carrier_phase);
    const auto du = tape.parameter({p.beam.delay_units.size()}, p.beam.delay_units);
    const auto field = taped_received_field(cp, du, users, cfg, grids);
    const auto noise = taped_noise(tape, seeds, cfg, grids);
    const TapedMlp mlp = make_taped_mlp(tape, p.mlp);
    const auto est = taped_localize(field, noise, mlp, scaling, std::nullopt, quantizer, cfg, path);
    const auto l = taped_rmse(est, users);
    if (grad) {
      tape.backward(l);
      grad->clear();
      for (double g : cp.grad()) grad->push_back(g);
      for (double g : du.grad()) grad->push_back(g);
      for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
        for (double g : mlp.weights[i].grad()) grad->push_back(g);
        for (double g : mlp.biases[i].grad()) grad->push_back(g);
      }
    }
    return l.item();
  }
};

/// Training loss on `users` toy samples with a fixed feature scaling.
inline LossProblem toy_problem(std::size_t users, std::uint64_t seed) {
  LossProblem prob;
  prob.cfg = toy_config();
  prob.grids = derive_grids(prob.cfg);
  prob.users = sample_users(users, prob.cfg, seed, Split::train).users;
  prob.seeds = sample_noise_seeds(seed, users);
  prob.scaling.num_subcarriers = prob.cfg.num_subcarriers;
  prob.scaling.power = {-40.0, 0.0};
  prob.quantizer = prob.scaling.power;
  return prob;
}

/// Ramp beam and a He-initialised estimator.
inline FlatParams toy_params(const SystemConfig& cfg, std::uint64_t seed) {
  FlatParams p;
  p.beam = to_coordinates(init_ramp_params(cfg, seed), cfg);
  p.mlp = init_mlp(default_mlp_dims(), seed + 1, 10.0);
  return p;
}

struct GradCheck {
  double max_rel = 0.0;
  std::size_t worst = 0;
  std::size_t count = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Central differences over every slot. Relative error uses
/// max(|analytic|, |numeric|, floor) as denominator so that exactly-zero
/// gradients (inactive ReLU units) compare on an absolute scale. A step
/// near 1e-5 balances roundoff in a loss of a few metres against the
/// chance of straddling a ReLU kink.
inline GradCheck check_gradients(const std::function<double()>& f, const std::vector<double*>& slots,
                                 const std::vector<double>& analytic, double eps, double floor = 1e-6) {
  GradCheck r;
  r.count = slots.size();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double keep = *slots[i];
    *slots[i] = keep + eps;
    const double up = f();
    *slots[i] = keep - eps;
    const double down = f();
    *slots[i] = keep;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > r.max_rel) {
      r.max_rel = rel;
      r.worst = i;
      r.worst_analytic = analytic[i];
      r.worst_numeric = numeric;
    }
  }
  return r;
}

/// Distance from the user to element n computed directly from coordinates,
/// with elements on the x axis centred at the origin.
inline double exact_element_distance(const UserPosition& u, int n, const SystemConfig& cfg) {
  const double theta = cfg.angle_convention == AngleConvention::boresight ? u.angle_rad + std::acos(-1.0) / 2
                                                                          : u.angle_rad;
  const double ux = u.range_m * std::cos(theta);
  const double uy = u.range_m * std::sin(theta);
  const double xn = (n - 0.5 * (cfg.num_antennas + 1)) * cfg.antenna_spacing_m();
  return std::hypot(ux - xn, uy);
}

}  // namespace ptaloc::testing
