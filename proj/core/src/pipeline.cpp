#include "ptaloc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ptaloc/dataset.hpp"
#include "ptaloc/error.hpp"
#include "ptaloc/field.hpp"
#include "ptaloc/kernels.hpp"

namespace ptaloc {

namespace {

// Users per channel block, sized so one block stays around 64 MB.
std::size_t channel_block(const SystemConfig& cfg) {
  const std::size_t per_user = static_cast<std::size_t>(cfg.num_subcarriers) * cfg.num_antennas;
  return std::max<std::size_t>(1, (std::size_t{1} << 22) / per_user);
}

std::vector<double> index_ramp(std::size_t M) {
  std::vector<double> idx(M);
  std::iota(idx.begin(), idx.end(), 1.0);
  return idx;
}

void check_seeds(std::span<const std::uint64_t> seeds, std::size_t users) {
  if (!seeds.empty() && seeds.size() != users) throw Error("need one noise seed per user, or none");
}

}  // namespace

std::vector<std::uint64_t> sample_noise_seeds(std::uint64_t base, std::size_t count, std::uint64_t salt) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = derive_seed(base, salt, i);
  return seeds;
}

std::vector<cplx> received_field(std::span<const UserPosition> users, std::span<const cplx> weights,
                                 const SystemConfig& cfg, const DerivedGrids& grids) {
  const std::size_t M = static_cast<std::size_t>(cfg.num_subcarriers);
  const std::size_t N = static_cast<std::size_t>(cfg.num_antennas);
  if (weights.size() != M * N) throw Error("received_field: weight matrix must be (M x N)");
  std::vector<cplx> field(users.size() * M);
  const std::size_t block = channel_block(cfg);
  std::vector<cplx> h;
  for (std::size_t start = 0; start < users.size(); start += block) {
    const std::size_t count = std::min(block, users.size() - start);
    h.resize(count * M * N);
    channel_batch(users.subspan(start, count), cfg, grids, h);
    kernels::conj_inner_product(h.data(), weights.data(), field.data() + start * M, count, M, N);
  }
  for (auto& v : field) v *= grids.tx_amplitude;
  return field;
}

std::vector<double> received_powers(std::span<const cplx> field, std::span<const std::uint64_t> noise_seeds,
                                    const SystemConfig& cfg, const DerivedGrids& grids) {
  const std::size_t M = static_cast<std::size_t>(cfg.num_subcarriers);
  if (field.size() % M != 0) throw Error("received_powers: field is not (K x M)");
  const std::size_t K = field.size() / M;
  check_seeds(noise_seeds, K);
  std::vector<double> p(field.size());
  for (std::size_t k = 0; k < K; ++k) {
    if (noise_seeds.empty()) {
      for (std::size_t m = 0; m < M; ++m) p[k * M + m] = std::norm(field[k * M + m]);
    } else {
      const auto noise = noise_vector(noise_seeds[k], cfg, grids);
      for (std::size_t m = 0; m < M; ++m) p[k * M + m] = std::norm(field[k * M + m] + noise[m]);
    }
  }
  return p;
}

std::vector<FeedbackMessage> hard_feedback(std::span<const double> powers, const SystemConfig& cfg,
                                           std::optional<int> bits, const PowerRange& range) {
  const std::size_t M = static_cast<std::size_t>(cfg.num_subcarriers);
  if (powers.size() % M != 0) throw Error("hard_feedback: powers are not (K x M)");
  std::vector<FeedbackMessage> msgs(powers.size() / M);
  for (std::size_t k = 0; k < msgs.size(); ++k) {
    msgs[k] = measure_feedback(powers.subspan(k * M, M), cfg.softmax_temperature, bits, range);
  }
  return msgs;
}

SoftFeedback soft_feedback(std::span<const double> powers, const SystemConfig& cfg) {
  const std::size_t M = static_cast<std::size_t>(cfg.num_subcarriers);
  if (powers.size() % M != 0) throw Error("soft_feedback: powers are not (K x M)");
  const std::size_t K = powers.size() / M;
  SoftFeedback out;
  out.soft_index.resize(K);
  out.power_dbm.resize(K);
  std::vector<double> scaled(M), w(M);
  for (std::size_t k = 0; k < K; ++k) {
    const double* p = powers.data() + k * M;
    kernels::max_normalize_row(p, M, scaled.data());
    kernels::softmax_scaled_row(scaled.data(), M, cfg.softmax_temperature, w.data());
    double idx = 0.0, pw = 0.0;
    for (std::size_t m = 0; m < M; ++m) idx += w[m] * static_cast<double>(m + 1);
    for (std::size_t m = 0; m < M; ++m) pw += w[m] * p[m];
    out.soft_index[k] = idx;
    out.power_dbm[k] = watts_to_dbm(pw);
  }
  return out;
}

std::vector<double> feedback_features(std::span<const FeedbackMessage> msgs, const FeatureScaling& scaling) {
  std::vector<double> f(2 * msgs.size());
  for (std::size_t k = 0; k < msgs.size(); ++k) {
    f[2 * k] = scaling.power_feature(msgs[k].power_dbm);
    f[2 * k + 1] = scaling.index_feature(static_cast<double>(msgs[k].subcarrier_index));
  }
  return f;
}

std::vector<FeedbackMessage> measure_users(const PtaParams& beam, std::span<const UserPosition> users,
                                           std::span<const std::uint64_t> noise_seeds, const SystemConfig& cfg,
                                           const DerivedGrids& grids, std::optional<int> bits,
                                           const PowerRange& range) {
  check_seeds(noise_seeds, users.size());
  const auto field = pta_field(users, project_params(beam, cfg), cfg, grids);
  const auto powers = received_powers(field, noise_seeds, cfg, grids);
  return hard_feedback(powers, cfg, bits, range);
}

std::vector<PositionEstimate> localize(const SpotModel& model, std::span<const UserPosition> users,
                                       std::span<const std::uint64_t> noise_seeds, const SystemConfig& cfg,
                                       const DerivedGrids& grids) {
  const auto msgs = measure_users(model.beam, users, noise_seeds, cfg, grids, model.bits, model.quantizer);
  return mlp_forward(model.mlp, feedback_features(msgs, model.scaling), cfg.angle_bound_rad);
}

ad::Value taped_received_field(const ad::Value& carrier_phase, const ad::Value& delay_units,
                               std::span<const UserPosition> users, const SystemConfig& cfg,
                               const DerivedGrids& grids) {
  const auto proj = taped_projection(carrier_phase, delay_units, cfg);
  return taped_pta_field(proj.phi, proj.delays, users, cfg, grids);
}

ad::Value taped_noise(ad::Tape& tape, std::span<const std::uint64_t> seeds, const SystemConfig& cfg,
                      const DerivedGrids& grids) {
  const std::size_t M = static_cast<std::size_t>(cfg.num_subcarriers);
  std::vector<cplx> n;
  n.reserve(seeds.size() * M);
  for (auto s : seeds) {
    const auto v = noise_vector(s, cfg, grids);
    n.insert(n.end(), v.begin(), v.end());
  }
  return tape.constant({seeds.size(), M}, std::move(n));
}

TapedEstimate taped_localize(const ad::Value& field, const ad::Value& noise, const TapedMlp& mlp,
                             const FeatureScaling& scaling, std::optional<int> bits, const PowerRange& quantizer,
                             const SystemConfig& cfg, FeedbackPath path) {
  const std::size_t M = static_cast<std::size_t>(cfg.num_subcarriers);
  if (field.shape().size() != 2 || field.shape()[1] != M) throw Error("taped_localize: field must be (K x M)");
  const auto y = noise.valid() ? ad::add(field, noise) : field;
  const auto power = ad::abs_squared(y);
  const auto weights = ad::softmax_scaled(ad::max_normalize_rows(power), cfg.softmax_temperature);
  auto soft_index = ad::row_dot(weights, index_ramp(M));
  auto power_dbm = ad::to_dbm(ad::row_sum(ad::mul(weights, power)));
  if (path == FeedbackPath::straight_through) {
    const std::size_t K = soft_index.size();
    const auto s = soft_index.data();
    const auto p = power.data();
    std::vector<double> hard_index(K), hard_dbm(K);
    for (std::size_t k = 0; k < K; ++k) {
      const int h = std::clamp(static_cast<int>(std::round(s[k])), 1, static_cast<int>(M));
      hard_index[k] = h;
      hard_dbm[k] = watts_to_dbm(p[k * M + static_cast<std::size_t>(h - 1)]);
    }
    soft_index = ad::straight_through(soft_index, std::move(hard_index));
    power_dbm = ad::straight_through(power_dbm, std::move(hard_dbm));
  }
  if (bits) power_dbm = ad::quantize_st(power_dbm, *bits, quantizer.lo_dbm, quantizer.hi_dbm);
  const ad::Value cols[2] = {ad::affine(power_dbm, scaling.power_scale(), scaling.power_shift()),
                             ad::affine(soft_index, scaling.index_scale(), scaling.index_shift())};
  return taped_mlp_forward(mlp, ad::stack_columns(cols), cfg.angle_bound_rad);
}

ad::Value taped_rmse(const TapedEstimate& est, std::span<const UserPosition> truths) {
  if (truths.empty() || truths.size() != est.x.size()) throw Error("taped_rmse: batch size mismatch");
  ad::Tape& tape = est.x.tape();
  std::vector<double> tx(truths.size()), ty(truths.size());
  for (std::size_t k = 0; k < truths.size(); ++k) {
    tx[k] = truths[k].x_m;
    ty[k] = truths[k].y_m;
  }
  const std::size_t K = truths.size();
  const auto dx = ad::sub(est.x, tape.constant({K}, std::move(tx)));
  const auto dy = ad::sub(est.y, tape.constant({K}, std::move(ty)));
  return ad::sqrt(ad::mean(ad::add(ad::square(dx), ad::square(dy))));
}

}  // namespace ptaloc
