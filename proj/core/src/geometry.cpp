#include "ptaloc/geometry.hpp"

#include <cmath>
#include <numbers>

#include "ptaloc/error.hpp"

namespace ptaloc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kReanchorStride = 32;

void check_range(const UserPosition& pos) {
  if (!(pos.range_m > 0.0) || !std::isfinite(pos.range_m)) throw Error("user range must be positive");
}

}  // namespace

UserPosition UserPosition::from_polar(double angle_rad, double range_m) {
  return {angle_rad, range_m, range_m * std::cos(angle_rad), range_m * std::sin(angle_rad)};
}

double axis_angle(const UserPosition& pos, const SystemConfig& cfg) {
  return cfg.angle_convention == AngleConvention::boresight ? pos.angle_rad + std::numbers::pi / 2 : pos.angle_rad;
}

double element_distance_axis(double axis_angle_rad, double range_m, double offset_m) {
  const double s = std::sin(axis_angle_rad);
  return range_m - offset_m * std::cos(axis_angle_rad) + offset_m * offset_m * s * s / (2.0 * range_m);
}

double element_distance_approx(const UserPosition& pos, int n, const SystemConfig& cfg) {
  const double offset = (n - 0.5 * (cfg.num_antennas + 1)) * cfg.antenna_spacing_m();
  return element_distance_axis(axis_angle(pos, cfg), pos.range_m, offset);
}

std::vector<cplx> array_response(const UserPosition& pos, int m, const SystemConfig& cfg,
                                 const DerivedGrids& grids) {
  check_range(pos);
  const double theta = axis_angle(pos, cfg);
  const double d = cfg.antenna_spacing_m();
  const double k = kTwoPi * grids.subcarrier_freqs_hz.at(m - 1) / cfg.speed_of_light_m_per_s;
  std::vector<cplx> a(grids.antenna_offsets.size());
  for (std::size_t n = 0; n < a.size(); ++n) {
    const double delta = element_distance_axis(theta, pos.range_m, grids.antenna_offsets[n] * d) - pos.range_m;
    a[n] = std::polar(1.0, -k * delta);
  }
  return a;
}

ChannelMatrix channel_matrix(const UserPosition& pos, const SystemConfig& cfg, const DerivedGrids& grids) {
  check_range(pos);
  const int M = cfg.num_subcarriers;
  const int N = cfg.num_antennas;
  const double c = cfg.speed_of_light_m_per_s;
  const double theta = axis_angle(pos, cfg);
  const double d = cfg.antenna_spacing_m();

  std::vector<double> delta(N);
  for (int n = 0; n < N; ++n) {
    delta[n] = element_distance_axis(theta, pos.range_m, grids.antenna_offsets[n] * d) - pos.range_m;
  }

  ChannelMatrix h;
  h.num_subcarriers = M;
  h.num_antennas = N;
  h.entries.resize(static_cast<std::size_t>(M) * N);
  h.path_gain.resize(M);
  for (int m = 0; m < M; ++m) {
    const double f = grids.subcarrier_freqs_hz[m];
    const double beta = c / (4.0 * std::numbers::pi * f * pos.range_m);
    h.path_gain[m] = beta;
    const double k = kTwoPi * f / c;
    const cplx common = std::polar(beta, k * pos.range_m);
    for (int n = 0; n < N; ++n) {
      h.entries[static_cast<std::size_t>(m) * N + n] = common * std::polar(1.0, -k * delta[n]);
    }
  }
  return h;
}

void channel_batch(std::span<const UserPosition> users, const SystemConfig& cfg, const DerivedGrids& grids,
                        std::span<cplx> out) {
  const std::size_t M = static_cast<std::size_t>(cfg.num_subcarriers);
  const std::size_t N = static_cast<std::size_t>(cfg.num_antennas);
  if (out.size() != users.size() * M * N) throw Error("channel_batch: output size mismatch");
  const double c = cfg.speed_of_light_m_per_s;
  const double d = cfg.antenna_spacing_m();
  const double df = cfg.subcarrier_spacing_hz;

  // h[m][n] = beta_m * exp(j k_m (2r - r_n)); the exponent is linear in m.
  std::vector<double> q(N), step_re(N), step_im(N), cur_re(N), cur_im(N);
  for (std::size_t k = 0; k < users.size(); ++k) {
    const UserPosition& pos = users[k];
    check_range(pos);
    const double theta = axis_angle(pos, cfg);
    for (std::size_t n = 0; n < N; ++n) {
      q[n] = 2.0 * pos.range_m - element_distance_axis(theta, pos.range_m, grids.antenna_offsets[n] * d);
      const double step = kTwoPi * df * q[n] / c;
      step_re[n] = std::cos(step);
      step_im[n] = std::sin(step);
    }
    cplx* base = out.data() + k * M * N;
    for (std::size_t m = 0; m < M; ++m) {
      const double f = grids.subcarrier_freqs_hz[m];
      if (m % kReanchorStride == 0) {
        const double kf = kTwoPi * f / c;
        for (std::size_t n = 0; n < N; ++n) {
          cur_re[n] = std::cos(kf * q[n]);
          cur_im[n] = std::sin(kf * q[n]);
        }
      } else {
        for (std::size_t n = 0; n < N; ++n) {
          const double re = cur_re[n] * step_re[n] - cur_im[n] * step_im[n];
          const double im = cur_re[n] * step_im[n] + cur_im[n] * step_re[n];
          cur_re[n] = re;
          cur_im[n] = im;
        }
      }
      const double beta = c / (4.0 * std::numbers::pi * f * pos.range_m);
      cplx* row = base + m * N;
      for (std::size_t n = 0; n < N; ++n) row[n] = cplx(beta * cur_re[n], beta * cur_im[n]);
    }
  }
}

}  // namespace ptaloc
