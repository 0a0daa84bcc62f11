#include "ptaloc/beamformer.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "ptaloc/error.hpp"
#include "ptaloc/kernels.hpp"

namespace ptaloc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_grid(std::span<const double> angles, std::span<const double> ranges) {
  if (angles.empty() || ranges.empty()) throw Error("pattern grid must be non-empty");
  for (double r : ranges) {
    if (!(r > 0.0)) throw Error("pattern grid ranges must be positive");
  }
}

}  // namespace

ProjectedPta project_params(const PtaParams& params, const SystemConfig& cfg) {
  if (params.theta_phi.size() != params.theta_t.size()) throw Error("PtaParams: phase/delay length mismatch");
  ProjectedPta out;
  out.phi.resize(params.theta_phi.size());
  out.delays.resize(params.theta_t.size());
  const double tmax = cfg.max_delay_s();
  for (std::size_t n = 0; n < out.phi.size(); ++n) {
    if (!std::isfinite(params.theta_phi[n]) || !std::isfinite(params.theta_t[n])) {
      throw Error("PtaParams: non-finite entry at antenna " + std::to_string(n + 1));
    }
    out.phi[n] = kernels::mod_positive(params.theta_phi[n], kTwoPi);
    out.delays[n] = kernels::mod_positive(params.theta_t[n], tmax);
  }
  return out;
}

std::vector<double> delay_phase_slopes(const DerivedGrids& grids) {
  std::vector<double> c(grids.subcarrier_freqs_hz.size());
  for (std::size_t m = 0; m < c.size(); ++m) c[m] = -kTwoPi * grids.subcarrier_freqs_hz[m];
  return c;
}

std::vector<cplx> beam_weights(const ProjectedPta& proj, int m, const DerivedGrids& grids) {
  const double f = grids.subcarrier_freqs_hz.at(m - 1);
  std::vector<cplx> w(proj.phi.size());
  for (std::size_t n = 0; n < w.size(); ++n) {
    const double psi = proj.phi[n] - kernels::cycle_phase(f, proj.delays[n]);
    w[n] = cplx(std::cos(psi), std::sin(psi));
  }
  return w;
}

std::vector<cplx> beam_weight_matrix(const ProjectedPta& proj, const DerivedGrids& grids) {
  const std::size_t M = grids.subcarrier_freqs_hz.size();
  const std::size_t N = proj.phi.size();
  std::vector<cplx> w(M * N);
  for (std::size_t m = 0; m < M; ++m) {
    const double f = grids.subcarrier_freqs_hz[m];
    for (std::size_t n = 0; n < N; ++n) {
      const double psi = proj.phi[n] - kernels::cycle_phase(f, proj.delays[n]);
      w[m * N + n] = cplx(std::cos(psi), std::sin(psi));
    }
  }
  return w;
}

std::vector<cplx> noise_vector(std::uint64_t seed, const SystemConfig& cfg, const DerivedGrids& grids) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 * grids.noise_power_w));
  std::vector<cplx> n(static_cast<std::size_t>(cfg.num_subcarriers));
  for (auto& v : n) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    v = cplx(re, im);
  }
  return n;
}

std::vector<cplx> received_signal(const ChannelMatrix& h, const ProjectedPta& proj, const DerivedGrids& grids,
                                  const SystemConfig& cfg, std::optional<std::uint64_t> noise_seed) {
  const std::size_t M = static_cast<std::size_t>(h.num_subcarriers);
  const std::size_t N = static_cast<std::size_t>(h.num_antennas);
  if (proj.phi.size() != N || proj.delays.size() != N || grids.subcarrier_freqs_hz.size() != M) {
    throw Error("received_signal: dimension mismatch between channel, beam and grids");
  }
  const auto w = beam_weight_matrix(proj, grids);
  std::vector<cplx> y(M);
  kernels::conj_inner_product(h.entries.data(), w.data(), y.data(), 1, M, N);
  for (auto& v : y) v *= grids.tx_amplitude;
  if (noise_seed) {
    const auto noise = noise_vector(*noise_seed, cfg, grids);
    for (std::size_t m = 0; m < M; ++m) y[m] += noise[m];
  }
  return y;
}

PatternMap beam_pattern_map(const ProjectedPta& proj, std::span<const double> angles_rad,
                            std::span<const double> ranges_m, const SystemConfig& cfg, const DerivedGrids& grids) {
  check_grid(angles_rad, ranges_m);
  PatternMap out{{angles_rad.begin(), angles_rad.end()}, {ranges_m.begin(), ranges_m.end()}, {}};
  out.values.resize(angles_rad.size() * ranges_m.size());
  const auto w = beam_weight_matrix(proj, grids);
  const std::size_t M = static_cast<std::size_t>(cfg.num_subcarriers);
  const std::size_t N = static_cast<std::size_t>(cfg.num_antennas);
  std::vector<UserPosition> one(1);
  std::vector<cplx> h(M * N), y(M);
  for (std::size_t i = 0; i < angles_rad.size(); ++i) {
    for (std::size_t j = 0; j < ranges_m.size(); ++j) {
      one[0] = UserPosition::from_polar(angles_rad[i], ranges_m[j]);
      channel_batch(one, cfg, grids, h);
      kernels::conj_inner_product(h.data(), w.data(), y.data(), 1, M, N);
      double best = 0.0;
      for (const auto& v : y) best = std::max(best, std::norm(v * grids.tx_amplitude));
      out.values[i * ranges_m.size() + j] = watts_to_dbm(best);
    }
  }
  return out;
}

PatternMap subcarrier_gain_map(const ProjectedPta& proj, int m, std::span<const double> angles_rad,
                               std::span<const double> ranges_m, const SystemConfig& cfg, const DerivedGrids& grids) {
  check_grid(angles_rad, ranges_m);
  PatternMap out{{angles_rad.begin(), angles_rad.end()}, {ranges_m.begin(), ranges_m.end()}, {}};
  out.values.resize(angles_rad.size() * ranges_m.size());
  const auto w = beam_weights(proj, m, grids);
  const double n2 = static_cast<double>(w.size()) * static_cast<double>(w.size());
  for (std::size_t i = 0; i < angles_rad.size(); ++i) {
    for (std::size_t j = 0; j < ranges_m.size(); ++j) {
      const auto a = array_response(UserPosition::from_polar(angles_rad[i], ranges_m[j]), m, cfg, grids);
      cplx acc{};
      for (std::size_t n = 0; n < a.size(); ++n) acc += std::conj(a[n]) * w[n];
      out.values[i * ranges_m.size() + j] = std::norm(acc) / n2;
    }
  }
  return out;
}

PatternMap subcarrier_power_map(const ProjectedPta& proj, int m, std::span<const double> angles_rad,
                                std::span<const double> ranges_m, const SystemConfig& cfg, const DerivedGrids& grids) {
  auto out = subcarrier_gain_map(proj, m, angles_rad, ranges_m, cfg, grids);
  const double f = grids.subcarrier_freqs_hz.at(m - 1);
  const double n = static_cast<double>(proj.phi.size());
  for (std::size_t j = 0; j < out.ranges_m.size(); ++j) {
    const double beta = cfg.speed_of_light_m_per_s / (4.0 * std::numbers::pi * f * out.ranges_m[j]);
    const double peak = beta * beta * n * n * grids.tx_amplitude * grids.tx_amplitude;
    for (std::size_t i = 0; i < out.angles_rad.size(); ++i) {
      auto& v = out.values[i * out.ranges_m.size() + j];
      v = watts_to_dbm(v * peak);
    }
  }
  return out;
}

double delay_unit_s(const SystemConfig& cfg) { return 1.0 / cfg.bandwidth_hz; }

BeamCoordinates to_coordinates(const PtaParams& params, const SystemConfig& cfg) {
  const double unit = delay_unit_s(cfg);
  BeamCoordinates c;
  c.carrier_phase.resize(params.theta_phi.size());
  c.delay_units.resize(params.theta_t.size());
  for (std::size_t n = 0; n < c.carrier_phase.size(); ++n) {
    c.delay_units[n] = params.theta_t[n] / unit;
    c.carrier_phase[n] = params.theta_phi[n] - kTwoPi * cfg.carrier_freq_hz * params.theta_t[n];
  }
  return c;
}

PtaParams from_coordinates(const BeamCoordinates& coords, const SystemConfig& cfg) {
  const double unit = delay_unit_s(cfg);
  const double phase_per_unit = kTwoPi * cfg.carrier_freq_hz * unit;
  PtaParams p;
  p.theta_phi.resize(coords.carrier_phase.size());
  p.theta_t.resize(coords.delay_units.size());
  for (std::size_t n = 0; n < p.theta_phi.size(); ++n) {
    p.theta_t[n] = coords.delay_units[n] * unit;
    p.theta_phi[n] = coords.carrier_phase[n] + coords.delay_units[n] * phase_per_unit;
  }
  return p;
}

ad::Value taped_beam_weights(const ad::Value& carrier_phase, const ad::Value& delay_units, const SystemConfig& cfg,
                             const DerivedGrids& grids) {
  const double unit = delay_unit_s(cfg);
  const double phase_per_unit = kTwoPi * cfg.carrier_freq_hz * unit;
  const auto theta_t = ad::scale(delay_units, unit);
  const auto theta_phi = ad::add(carrier_phase, ad::scale(delay_units, phase_per_unit));
  const auto phi = ad::mod_const(theta_phi, kTwoPi);
  const auto t = ad::mod_const(theta_t, cfg.max_delay_s());
  const auto slopes = delay_phase_slopes(grids);
  const auto psi = ad::add(ad::tile_rows(phi, slopes.size()), ad::outer_const(slopes, t));
  return ad::expj(psi);
}

PtaParams init_ramp_params(const SystemConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::uniform_real_distribution<double> jitter(0.0, 0.1 * cfg.max_delay_s());
  const double step = 1.0 / (cfg.num_subcarriers * cfg.subcarrier_spacing_hz);
  PtaParams p;
  p.theta_phi.resize(static_cast<std::size_t>(cfg.num_antennas));
  p.theta_t.resize(static_cast<std::size_t>(cfg.num_antennas));
  for (std::size_t n = 0; n < p.theta_phi.size(); ++n) p.theta_phi[n] = phase(rng);
  for (std::size_t n = 0; n < p.theta_t.size(); ++n) p.theta_t[n] = static_cast<double>(n) * step + jitter(rng);
  return p;
}

}  // namespace ptaloc
