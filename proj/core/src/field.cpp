#include "ptaloc/field.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "ptaloc/error.hpp"
#include "ptaloc/kernels.hpp"

namespace ptaloc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kReanchor = 32;

struct FieldGeometry {
  std::size_t K = 0, M = 0, N = 0;
  std::vector<double> tau_prop;  // (K x N)
  std::vector<double> gain;      // (K x M): s * beta_m
  std::vector<double> freqs;     // f_m
  double fscs = 0.0;
};

FieldGeometry make_geometry(std::span<const UserPosition> users, const SystemConfig& cfg,
                            const DerivedGrids& grids) {
  FieldGeometry g;
  g.K = users.size();
  g.M = static_cast<std::size_t>(cfg.num_subcarriers);
  g.N = static_cast<std::size_t>(cfg.num_antennas);
  g.tau_prop = propagation_delays(users, cfg, grids);
  g.freqs = grids.subcarrier_freqs_hz;
  g.fscs = cfg.subcarrier_spacing_hz;
  g.gain.resize(g.K * g.M);
  for (std::size_t k = 0; k < g.K; ++k) {
    const double base = grids.tx_amplitude * cfg.speed_of_light_m_per_s / (4.0 * std::numbers::pi * users[k].range_m);
    for (std::size_t m = 0; m < g.M; ++m) g.gain[k * g.M + m] = base / g.freqs[m];
  }
  return g;
}

// Walks the subcarriers of user k, handing the current unit phasors
// exp(j(phi_n - 2 pi f_m tau_n)) for each m to `visit`.
template <typename Visit>
void walk_user(const FieldGeometry& g, std::size_t k, const double* phi, const double* t, std::vector<double>& tau,
               std::vector<double>& cur_re, std::vector<double>& cur_im, std::vector<double>& step_re,
               std::vector<double>& step_im, Visit visit) {
  const std::size_t N = g.N;
  for (std::size_t n = 0; n < N; ++n) {
    tau[n] = g.tau_prop[k * N + n] + t[n];
    const double s = -kernels::cycle_phase(g.fscs, tau[n]);
    step_re[n] = std::cos(s);
    step_im[n] = std::sin(s);
  }
  for (std::size_t m = 0; m < g.M; ++m) {
    if (m % kReanchor == 0) {
      const double f = g.freqs[m];
      for (std::size_t n = 0; n < N; ++n) {
        const double psi = phi[n] - kernels::cycle_phase(f, tau[n]);
        cur_re[n] = std::cos(psi);
        cur_im[n] = std::sin(psi);
      }
    } else {
      for (std::size_t n = 0; n < N; ++n) {
        const double re = cur_re[n] * step_re[n] - cur_im[n] * step_im[n];
        const double im = cur_re[n] * step_im[n] + cur_im[n] * step_re[n];
        cur_re[n] = re;
        cur_im[n] = im;
      }
    }
    visit(m, cur_re.data(), cur_im.data());
  }
}

void field_forward(const FieldGeometry& g, const double* phi, const double* t, cplx* y) {
  std::vector<double> tau(g.N), cr(g.N), ci(g.N), sr(g.N), si(g.N);
  for (std::size_t k = 0; k < g.K; ++k) {
    walk_user(g, k, phi, t, tau, cr, ci, sr, si, [&](std::size_t m, const double* re, const double* im) {
      double ar = 0.0, ai = 0.0;
      for (std::size_t n = 0; n < g.N; ++n) {
        ar += re[n];
        ai += im[n];
      }
      const double a = g.gain[k * g.M + m];
      y[k * g.M + m] = cplx(a * ar, a * ai);
    });
  }
}

// dL/dphi_n = -Im(sum_m G_m a_m e_mn), dL/dt_n = 2 pi Im(sum_m G_m a_m f_m e_mn).
void field_backward(const FieldGeometry& g, const double* phi, const double* t, const cplx* grad, double* dphi,
                    double* dt) {
  std::vector<double> tau(g.N), cr(g.N), ci(g.N), sr(g.N), si(g.N);
  std::vector<double> a_im(g.N), b_im(g.N);
  for (std::size_t k = 0; k < g.K; ++k) {
    std::fill(a_im.begin(), a_im.end(), 0.0);
    std::fill(b_im.begin(), b_im.end(), 0.0);
    walk_user(g, k, phi, t, tau, cr, ci, sr, si, [&](std::size_t m, const double* re, const double* im) {
      const cplx gm = grad[k * g.M + m] * g.gain[k * g.M + m];
      const double gr = gm.real(), gi = gm.imag();
      const double f = g.freqs[m];
      for (std::size_t n = 0; n < g.N; ++n) {
        const double p = gr * im[n] + gi * re[n];  // Im(gm * e)
        a_im[n] += p;
        b_im[n] += f * p;
      }
    });
    for (std::size_t n = 0; n < g.N; ++n) {
      dphi[n] -= a_im[n];
      dt[n] += kTwoPi * b_im[n];
    }
  }
}

}  // namespace

std::vector<double> propagation_delays(std::span<const UserPosition> users, const SystemConfig& cfg,
                                       const DerivedGrids& grids) {
  const std::size_t N = static_cast<std::size_t>(cfg.num_antennas);
  const double c = cfg.speed_of_light_m_per_s;
  const double d = cfg.antenna_spacing_m();
  std::vector<double> tau(users.size() * N);
  for (std::size_t k = 0; k < users.size(); ++k) {
    const auto& u = users[k];
    if (!(u.range_m > 0.0)) throw Error("propagation_delays: user range must be positive");
    const double theta = axis_angle(u, cfg);
    for (std::size_t n = 0; n < N; ++n) {
      tau[k * N + n] = (2.0 * u.range_m - element_distance_axis(theta, u.range_m, grids.antenna_offsets[n] * d)) / c;
    }
  }
  return tau;
}

std::vector<cplx> pta_field(std::span<const UserPosition> users, const ProjectedPta& proj, const SystemConfig& cfg,
                            const DerivedGrids& grids) {
  const std::size_t N = static_cast<std::size_t>(cfg.num_antennas);
  if (proj.phi.size() != N || proj.delays.size() != N) throw Error("pta_field: beam does not match the array");
  const auto g = make_geometry(users, cfg, grids);
  std::vector<cplx> y(g.K * g.M);
  field_forward(g, proj.phi.data(), proj.delays.data(), y.data());
  return y;
}

TapedProjection taped_projection(const ad::Value& carrier_phase, const ad::Value& delay_units,
                                 const SystemConfig& cfg) {
  const double unit = delay_unit_s(cfg);
  const double phase_per_unit = kTwoPi * cfg.carrier_freq_hz * unit;
  const auto theta_t = ad::scale(delay_units, unit);
  const auto theta_phi = ad::add(carrier_phase, ad::scale(delay_units, phase_per_unit));
  return {ad::mod_const(theta_phi, kTwoPi), ad::mod_const(theta_t, cfg.max_delay_s())};
}

ad::Value taped_pta_field(const ad::Value& phi, const ad::Value& delays, std::span<const UserPosition> users,
                          const SystemConfig& cfg, const DerivedGrids& grids) {
  const std::size_t N = static_cast<std::size_t>(cfg.num_antennas);
  if (phi.is_complex() || delays.is_complex() || phi.size() != N || delays.size() != N) {
    throw Error("taped_pta_field: phi and delays must be real vectors of length N");
  }
  if (users.empty()) throw Error("taped_pta_field: empty batch");
  auto g = std::make_shared<FieldGeometry>(make_geometry(users, cfg, grids));
  ad::Tape::Node n;
  n.op = "pta_field";
  n.shape = {g->K, g->M};
  n.complex = true;
  n.inputs = {phi.id(), delays.id()};
  n.requires_grad = phi.requires_grad() || delays.requires_grad();
  n.cx.resize(g->K * g->M);
  field_forward(*g, phi.data().data(), delays.data().data(), n.cx.data());
  if (n.requires_grad) {
    n.backward = [g](ad::Tape& t, std::size_t self) {
      const auto& out = t.node(self);
      auto& pn = t.node(out.inputs[0]);
      auto& tn = t.node(out.inputs[1]);
      std::vector<double> dphi(g->N, 0.0), dt(g->N, 0.0);
      field_backward(*g, pn.re.data(), tn.re.data(), out.grad_cx.data(), dphi.data(), dt.data());
      if (pn.requires_grad) {
        for (std::size_t i = 0; i < g->N; ++i) pn.grad_re[i] += dphi[i];
      }
      if (tn.requires_grad) {
        for (std::size_t i = 0; i < g->N; ++i) tn.grad_re[i] += dt[i];
      }
    };
  }
  return phi.tape().record(std::move(n));
}

}  // namespace ptaloc
