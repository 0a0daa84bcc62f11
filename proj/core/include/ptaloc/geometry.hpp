#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "ptaloc/config.hpp"

namespace ptaloc {

using cplx = std::complex<double>;

/// One user, polar and Cartesian. The angle follows cfg.angle_convention.
struct UserPosition {
  double angle_rad = 0.0;
  double range_m = 1.0;
  double x_m = 1.0;
  double y_m = 0.0;

  static UserPosition from_polar(double angle_rad, double range_m);
};

/// Per-user LoS channel for every subcarrier: h[m][n], row-major (M x N).
struct ChannelMatrix {
  int num_subcarriers = 0;
  int num_antennas = 0;
  std::vector<cplx> entries;
  std::vector<double> path_gain;  // beta[m] = c / (4 pi f_m r)

  const cplx& at(int m, int n) const { return entries[static_cast<std::size_t>(m) * num_antennas + n]; }
  std::span<const cplx> row(int m) const {
    return {entries.data() + static_cast<std::size_t>(m) * num_antennas, static_cast<std::size_t>(num_antennas)};
  }
};

/// Angle from the array axis, the frame in which the distance expansion is written.
double axis_angle(const UserPosition& pos, const SystemConfig& cfg);

/// Second-order expansion of the element-to-user distance for an element at
/// signed offset `offset_m` along the array axis.
double element_distance_axis(double axis_angle_rad, double range_m, double offset_m);

/// Expansion for element `n` (1-based, n in 1..N).
double element_distance_approx(const UserPosition& pos, int n, const SystemConfig& cfg);

/// Unit-modulus array response at subcarrier `m` (1-based).
std::vector<cplx> array_response(const UserPosition& pos, int m, const SystemConfig& cfg, const DerivedGrids& grids);

/// Throws Error when range_m <= 0.
ChannelMatrix channel_matrix(const UserPosition& pos, const SystemConfig& cfg, const DerivedGrids& grids);

/// h[m][n] for a batch of users into `out` laid out as (K x M x N).
/// Uses a per-antenna phase recurrence across subcarriers, re-anchored
/// every 32 subcarriers; agrees with channel_matrix to ~1e-13 relative.
void channel_batch(std::span<const UserPosition> users, const SystemConfig& cfg, const DerivedGrids& grids,
                        std::span<cplx> out);

}  // namespace ptaloc
