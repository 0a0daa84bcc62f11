#include "ptaloc/cbs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ptaloc/error.hpp"
#include "ptaloc/field.hpp"
#include "ptaloc/kernels.hpp"
#include "ptaloc/pipeline.hpp"

namespace ptaloc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

double focusing_phase(const Anchor& anchor, double freq_hz, std::size_t n, const SystemConfig& cfg,
                      const DerivedGrids& grids) {
  const auto pos = UserPosition::from_polar(anchor.angle_rad, anchor.range_m);
  const double rn = element_distance_axis(axis_angle(pos, cfg), anchor.range_m,
                                          grids.antenna_offsets.at(n) * cfg.antenna_spacing_m());
  return -kTwoPi * freq_hz * (rn - anchor.range_m) / cfg.speed_of_light_m_per_s;
}

CbsDesign cbs_design(const Anchor& start, const Anchor& end, const SystemConfig& cfg, const DerivedGrids& grids) {
  if (!(start.range_m > 0.0) || !(end.range_m > 0.0)) throw Error("cbs_design: anchor ranges must be positive");
  const double f1 = grids.subcarrier_freqs_hz.front();
  const double fM = grids.subcarrier_freqs_hz.back();
  if (!(fM > f1)) throw Error("cbs_design: lowest and highest subcarrier coincide");
  const std::size_t N = grids.antenna_offsets.size();
  const double tmax = cfg.max_delay_s();
  CbsDesign d{start, end, {}};
  d.params.theta_phi.resize(N);
  d.params.theta_t.resize(N);
  for (std::size_t n = 0; n < N; ++n) {
    // The focusing phases are evaluated in closed form, so they are already
    // unwrapped. Two linear equations in (phi, t):
    //   phi - 2 pi f1 t = psi1,   phi - 2 pi fM t = psiM.
    const double psi1 = focusing_phase(start, f1, n, cfg, grids);
    const double psiM = focusing_phase(end, fM, n, cfg, grids);
    const double t = (psi1 - psiM) / (kTwoPi * (fM - f1));
    const double phi = psi1 + kTwoPi * f1 * t;
    // Folding t by whole periods of 1/f_scs shifts every subcarrier phase by
    // a multiple of 2 pi once the f1 phase is absorbed into phi.
    const double t_folded = kernels::mod_positive(t, tmax);
    d.params.theta_t[n] = t_folded;
    d.params.theta_phi[n] = kernels::mod_positive(phi - kTwoPi * f1 * (t - t_folded), kTwoPi);
  }
  return d;
}

CbsDesign default_cbs_design(const SystemConfig& cfg, const DerivedGrids& grids) {
  const double bound = std::min(cfg.angle_bound_rad, std::numbers::pi / 3.0);
  const double range = std::clamp(10.0, cfg.range_min_m, cfg.range_max_m);
  return cbs_design({-bound, range}, {bound, range}, cfg, grids);
}

std::vector<IndexDistancePoint> index_distance_curve(const PtaParams& beam, double angle_rad,
                                                     std::span<const double> ranges_m, const SystemConfig& cfg,
                                                     const DerivedGrids& grids) {
  const std::size_t M = static_cast<std::size_t>(cfg.num_subcarriers);
  std::vector<UserPosition> users;
  for (double r : ranges_m) users.push_back(UserPosition::from_polar(angle_rad, r));
  const auto field = pta_field(users, project_params(beam, cfg), cfg, grids);
  std::vector<IndexDistancePoint> curve;
  for (std::size_t k = 0; k < users.size(); ++k) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < M; ++m) {
      if (std::norm(field[k * M + m]) > std::norm(field[k * M + best])) best = m;
    }
    curve.push_back({ranges_m[k], static_cast<int>(best) + 1});
  }
  return curve;
}

std::vector<double> isotonic_nonincreasing(std::span<const double> y) {
  // Pool adjacent violators on the negated sequence (non-decreasing fit).
  struct Block {
    double sum;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (double v : y) {
    blocks.push_back({-v, 1});
    while (blocks.size() > 1) {
      const auto& b = blocks[blocks.size() - 1];
      const auto& a = blocks[blocks.size() - 2];
      if (a.sum / static_cast<double>(a.count) <= b.sum / static_cast<double>(b.count)) break;
      const Block merged{a.sum + b.sum, a.count + b.count};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, -b.sum / static_cast<double>(b.count));
  return out;
}

LookupTable build_lookup_table(const PtaParams& beam, const SystemConfig& cfg, const DerivedGrids& grids,
                               const LookupOptions& opts) {
  if (!(opts.bin_width_rad > 0.0) || !(opts.range_step_m > 0.0)) throw Error("lookup: invalid calibration steps");
  const std::size_t M = static_cast<std::size_t>(cfg.num_subcarriers);
  const double bound = cfg.angle_bound_rad;
  const auto nbins = static_cast<std::size_t>(std::ceil(2.0 * bound / opts.bin_width_rad - 1e-9));
  const double width = 2.0 * bound / static_cast<double>(nbins);
  std::vector<double> ranges;
  for (double r = cfg.range_min_m; r <= cfg.range_max_m + 1e-9; r += opts.range_step_m) ranges.push_back(r);

  LookupTable table;
  table.range_min_m = cfg.range_min_m;
  table.range_max_m = cfg.range_max_m;
  table.bits = opts.bits;
  table.power = opts.power;
  std::vector<double> angle_sum(M, 0.0);
  std::vector<double> angle_count(M, 0.0);

  for (std::size_t b = 0; b < nbins; ++b) {
    LookupBin bin;
    bin.angle_lo_rad = -bound + static_cast<double>(b) * width;
    bin.angle_hi_rad = bin.angle_lo_rad + width;
    const double centre = 0.5 * (bin.angle_lo_rad + bin.angle_hi_rad);
    std::vector<UserPosition> users;
    for (double r : ranges) users.push_back(UserPosition::from_polar(centre, r));
    const auto msgs = measure_users(beam, users, {}, cfg, grids, opts.bits, opts.power);

    std::vector<std::pair<double, double>> pairs;  // (power, range)
    for (std::size_t k = 0; k < msgs.size(); ++k) {
      pairs.emplace_back(msgs[k].power_dbm, ranges[k]);
      const auto m = static_cast<std::size_t>(msgs[k].subcarrier_index - 1);
      angle_sum[m] += centre;
      angle_count[m] += 1.0;
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<double> r_sorted;
    for (const auto& [p, r] : pairs) {
      bin.power_dbm.push_back(p);
      r_sorted.push_back(r);
    }
    bin.range_m = isotonic_nonincreasing(r_sorted);
    table.bins.push_back(std::move(bin));
  }

  // Index-to-angle map: mean calibration angle per index, with gaps filled by
  // linear interpolation between the nearest populated indices.
  table.index_angle_rad.assign(M, 0.0);
  std::vector<std::size_t> filled;
  for (std::size_t m = 0; m < M; ++m) {
    if (angle_count[m] > 0.0) {
      table.index_angle_rad[m] = angle_sum[m] / angle_count[m];
      filled.push_back(m);
    }
  }
  if (filled.empty()) throw Error("lookup: calibration produced no indices");
  for (std::size_t m = 0; m < M; ++m) {
    if (angle_count[m] > 0.0) continue;
    const auto hi = std::lower_bound(filled.begin(), filled.end(), m);
    if (hi == filled.begin()) {
      table.index_angle_rad[m] = table.index_angle_rad[*hi];
    } else if (hi == filled.end()) {
      table.index_angle_rad[m] = table.index_angle_rad[filled.back()];
    } else {
      const std::size_t a = *(hi - 1), b = *hi;
      const double t = static_cast<double>(m - a) / static_cast<double>(b - a);
      table.index_angle_rad[m] = (1.0 - t) * table.index_angle_rad[a] + t * table.index_angle_rad[b];
    }
  }
  return table;
}

PositionEstimate lookup_estimate(const FeedbackMessage& msg, const LookupTable& table) {
  if (table.bins.empty()) throw Error("lookup: table has no bins");
  const auto m = static_cast<std::size_t>(
      std::clamp(msg.subcarrier_index, 1, static_cast<int>(table.index_angle_rad.size())) - 1);
  const double angle = table.index_angle_rad[m];
  std::size_t b = 0;
  while (b + 1 < table.bins.size() && angle >= table.bins[b].angle_hi_rad) ++b;
  const LookupBin& bin = table.bins[b];
  if (bin.power_dbm.empty()) throw Error("lookup: empty angle bin");

  double range;
  const double p = msg.power_dbm;
  if (p >= bin.power_dbm.back()) {
    range = table.range_min_m;
  } else if (p <= bin.power_dbm.front()) {
    range = bin.range_m.front();
  } else {
    const auto hi = static_cast<std::size_t>(std::upper_bound(bin.power_dbm.begin(), bin.power_dbm.end(), p) -
                                             bin.power_dbm.begin());
    const std::size_t lo = hi - 1;
    const double span = bin.power_dbm[hi] - bin.power_dbm[lo];
    const double t = span > 0.0 ? (p - bin.power_dbm[lo]) / span : 0.0;
    range = (1.0 - t) * bin.range_m[lo] + t * bin.range_m[hi];
  }
  range = std::clamp(range, table.range_min_m, table.range_max_m);
  PositionEstimate e;
  e.angle_rad = angle;
  e.range_m = range;
  e.x_m = range * std::cos(angle);
  e.y_m = range * std::sin(angle);
  return e;
}

}  // namespace ptaloc
