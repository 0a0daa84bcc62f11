#pragma once

// Analytic rainbow beam: per antenna, a phase and a delay chosen so the
// lowest subcarrier focuses on a start point and the highest on an end
// point; the subcarriers in between trace a path between the two. Also the
// non-learned lookup estimator built on such a beam.

#include <optional>
#include <span>
#include <vector>

#include "ptaloc/beamformer.hpp"
#include "ptaloc/feedback.hpp"
#include "ptaloc/mlp.hpp"

namespace ptaloc {

struct Anchor {
  double angle_rad = 0.0;
  double range_m = 10.0;
};

struct CbsDesign {
  Anchor start;
  Anchor end;
  PtaParams params;  // already in the projected range
};

/// Phase that matches the array response toward `anchor` at `freq_hz` for
/// antenna n (0-based): -2 pi f (r_n - r) / c.
double focusing_phase(const Anchor& anchor, double freq_hz, std::size_t n, const SystemConfig& cfg,
                      const DerivedGrids& grids);

/// Throws Error when the lowest and highest subcarrier coincide.
CbsDesign cbs_design(const Anchor& start, const Anchor& end, const SystemConfig& cfg, const DerivedGrids& grids);

/// Anchors of the fixed analytic beam used as the baseline in sweeps:
/// (-60 deg, 10 m) to (+60 deg, 10 m), clamped to the configured bounds.
CbsDesign default_cbs_design(const SystemConfig& cfg, const DerivedGrids& grids);

struct IndexDistancePoint {
  double range_m = 0.0;
  int index = 1;  // 1-based argmax of noiseless received power
};

std::vector<IndexDistancePoint> index_distance_curve(const PtaParams& beam, double angle_rad,
                                                     std::span<const double> ranges_m, const SystemConfig& cfg,
                                                     const DerivedGrids& grids);

/// Least-squares non-increasing fit (pool adjacent violators, unit weights).
std::vector<double> isotonic_nonincreasing(std::span<const double> y);

struct LookupBin {
  double angle_lo_rad = 0.0;
  double angle_hi_rad = 0.0;
  std::vector<double> power_dbm;  // ascending
  std::vector<double> range_m;    // non-increasing, paired with power_dbm
};

struct LookupTable {
  std::vector<LookupBin> bins;
  std::vector<double> index_angle_rad;  // angle associated with each subcarrier index, [m-1]
  double range_min_m = 0.0;
  double range_max_m = 0.0;
  std::optional<int> bits;
  PowerRange power;
};

struct LookupOptions {
  double bin_width_rad = 0.03490658503988659;  // 2 degrees
  double range_step_m = 1.0;
  std::optional<int> bits;
  PowerRange power;
};

/// Noiseless calibration sweep over bin-centre angles and a range grid.
LookupTable build_lookup_table(const PtaParams& beam, const SystemConfig& cfg, const DerivedGrids& grids,
                               const LookupOptions& opts = {});

/// Angle from the index-to-angle map, range by inverting the power curve of
/// the matching angle bin, clamped to the service region. Throws Error on an
/// empty bin.
PositionEstimate lookup_estimate(const FeedbackMessage& msg, const LookupTable& table);

}  // namespace ptaloc
