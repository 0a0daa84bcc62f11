#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ptaloc/autodiff.hpp"
#include "ptaloc/config.hpp"
#include "ptaloc/geometry.hpp"

namespace ptaloc {

/// Unconstrained phase-shifter (rad) and true-time-delay (s) settings.
struct PtaParams {
  std::vector<double> theta_phi;
  std::vector<double> theta_t;
};

/// Settings folded into hardware range: phi in [0, 2pi), delays in [0, 1/f_scs).
struct ProjectedPta {
  std::vector<double> phi;
  std::vector<double> delays;
};

/// Throws Error on non-finite or mismatched input.
ProjectedPta project_params(const PtaParams& params, const SystemConfig& cfg);

/// -2 pi f_m for every subcarrier; the per-delay phase slope.
std::vector<double> delay_phase_slopes(const DerivedGrids& grids);

/// exp(j (phi_n - 2 pi f_m t_n)) for subcarrier m (1-based).
std::vector<cplx> beam_weights(const ProjectedPta& proj, int m, const DerivedGrids& grids);

/// All subcarriers at once, row-major (M x N).
std::vector<cplx> beam_weight_matrix(const ProjectedPta& proj, const DerivedGrids& grids);

/// Noise for one user: every subcarrier gets CN(0, noise_power_w), drawn
/// from an engine seeded with `seed`.
std::vector<cplx> noise_vector(std::uint64_t seed, const SystemConfig& cfg, const DerivedGrids& grids);

/// y_m = h_m^H w(m) s_m + n_m. Noiseless when `noise_seed` is empty.
std::vector<cplx> received_signal(const ChannelMatrix& h, const ProjectedPta& proj, const DerivedGrids& grids,
                                  const SystemConfig& cfg, std::optional<std::uint64_t> noise_seed);

/// Value grid over angles x ranges, row-major [angle][range].
struct PatternMap {
  std::vector<double> angles_rad;
  std::vector<double> ranges_m;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * ranges_m.size() + j]; }
};

/// max_m |h^H w(m) s_m|^2 in dBm, noiseless. Throws Error on an empty grid.
PatternMap beam_pattern_map(const ProjectedPta& proj, std::span<const double> angles_rad,
                            std::span<const double> ranges_m, const SystemConfig& cfg, const DerivedGrids& grids);

/// |a(theta, r, m)^H w(m)|^2 / N^2 for one subcarrier (1-based): the focusing
/// gain with path loss removed; 1 exactly at a matched focus.
PatternMap subcarrier_gain_map(const ProjectedPta& proj, int m, std::span<const double> angles_rad,
                               std::span<const double> ranges_m, const SystemConfig& cfg, const DerivedGrids& grids);

/// |h^H w(m) s_m|^2 in dBm for one subcarrier (1-based), noiseless.
PatternMap subcarrier_power_map(const ProjectedPta& proj, int m, std::span<const double> angles_rad,
                                std::span<const double> ranges_m, const SystemConfig& cfg, const DerivedGrids& grids);

// ---- Trainable coordinates ---------------------------------------------------
//
// The delay term -2 pi f_m t mixes a carrier-frequency phase (huge slope in t)
// with the band-limited dispersion that actually shapes the rainbow. Training
// runs on a linear reparameterization that separates the two:
//   carrier_phase = theta_phi - 2 pi f_c theta_t   (rad)
//   delay_units   = theta_t / delay_unit            (delay_unit = 1/B)

struct BeamCoordinates {
  std::vector<double> carrier_phase;
  std::vector<double> delay_units;
};

double delay_unit_s(const SystemConfig& cfg);
BeamCoordinates to_coordinates(const PtaParams& params, const SystemConfig& cfg);
PtaParams from_coordinates(const BeamCoordinates& coords, const SystemConfig& cfg);

/// Taped weight matrix (M x N complex) from coordinate leaves of length N.
ad::Value taped_beam_weights(const ad::Value& carrier_phase, const ad::Value& delay_units, const SystemConfig& cfg,
                             const DerivedGrids& grids);

/// Phase ~ U[0, 2pi); delays = n / B ramp plus U[0, 0.1/f_scs) jitter.
PtaParams init_ramp_params(const SystemConfig& cfg, std::uint64_t seed);

}  // namespace ptaloc
