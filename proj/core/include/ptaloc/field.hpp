#pragma once

// Fused received field for a phase-time array. For user k the product
// conj(h_mn) w_mn is beta_m exp(j(phi_n - 2 pi f_m tau_n)) with the total
// per-antenna delay tau_n = (2 r - r_n)/c + t_n, which is geometric in m.
// The field is therefore summed with a per-antenna recurrence instead of
// materialising the (M x N) channel, forward and backward.

#include <span>
#include <vector>

#include "ptaloc/autodiff.hpp"
#include "ptaloc/beamformer.hpp"
#include "ptaloc/config.hpp"
#include "ptaloc/geometry.hpp"

namespace ptaloc {

/// Propagation part of tau_n for every user and antenna, (K x N) seconds.
std::vector<double> propagation_delays(std::span<const UserPosition> users, const SystemConfig& cfg,
                                       const DerivedGrids& grids);

/// s * h^H w for every user and subcarrier, (K x M). Matches
/// received_field(users, beam_weight_matrix(proj)) to rounding.
std::vector<cplx> pta_field(std::span<const UserPosition> users, const ProjectedPta& proj, const SystemConfig& cfg,
                            const DerivedGrids& grids);

/// Projected phases and delays on the tape from trainable coordinates.
struct TapedProjection {
  ad::Value phi;
  ad::Value delays;
};
TapedProjection taped_projection(const ad::Value& carrier_phase, const ad::Value& delay_units,
                                 const SystemConfig& cfg);

/// Taped pta_field with inputs phi (N) and delays (N); complex (K x M) output.
ad::Value taped_pta_field(const ad::Value& phi, const ad::Value& delays, std::span<const UserPosition> users,
                          const SystemConfig& cfg, const DerivedGrids& grids);

}  // namespace ptaloc
