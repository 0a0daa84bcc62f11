#include "ptaloc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "ptaloc/error.hpp"
#include "ptaloc/field.hpp"

namespace ptaloc {

namespace {

// Above this many cached complex samples the fixed-beam path regenerates the
// field per batch instead of holding the whole training set in memory.
constexpr std::size_t kFieldCacheLimit = std::size_t{1} << 25;

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return (1.0 - t) * v[lo] + t * v[hi];
}

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

struct Flat {
  std::vector<std::vector<double>*> params;
  std::vector<double> lr_scales;
};

}  // namespace

LossReport loss_rmse(std::span<const PositionEstimate> estimates, std::span<const UserPosition> truths) {
  if (estimates.empty()) throw Error("loss_rmse: empty batch");
  if (estimates.size() != truths.size()) throw Error("loss_rmse: estimate/truth length mismatch");
  LossReport r;
  r.squared_errors.resize(estimates.size());
  double se = 0.0, sa = 0.0, sr = 0.0;
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    const double dx = estimates[k].x_m - truths[k].x_m;
    const double dy = estimates[k].y_m - truths[k].y_m;
    r.squared_errors[k] = dx * dx + dy * dy;
    se += r.squared_errors[k];
    const double da = wrap_angle(estimates[k].angle_rad - truths[k].angle_rad);
    const double dr = estimates[k].range_m - truths[k].range_m;
    sa += da * da;
    sr += dr * dr;
  }
  const double n = static_cast<double>(estimates.size());
  r.rmse_2d_m = std::sqrt(se / n);
  r.angle_rmse_rad = std::sqrt(sa / n);
  r.range_rmse_m = std::sqrt(sr / n);
  return r;
}

double centroid_rmse(const Dataset& train, const Dataset& eval) {
  if (train.users.empty() || eval.users.empty()) throw Error("centroid_rmse: empty dataset");
  double cx = 0.0, cy = 0.0;
  for (const auto& u : train.users) {
    cx += u.x_m;
    cy += u.y_m;
  }
  cx /= static_cast<double>(train.size());
  cy /= static_cast<double>(train.size());
  double se = 0.0;
  for (const auto& u : eval.users) se += (u.x_m - cx) * (u.x_m - cx) + (u.y_m - cy) * (u.y_m - cy);
  return std::sqrt(se / static_cast<double>(eval.size()));
}

PowerRange calibrate_power_range(const PtaParams& beam, std::span<const UserPosition> users,
                                 const SystemConfig& cfg, const DerivedGrids& grids, std::uint64_t noise_seed) {
  if (users.empty()) throw Error("calibrate_power_range: no users");
  const auto seeds = sample_noise_seeds(noise_seed, users.size());
  const auto msgs = measure_users(beam, users, seeds, cfg, grids, std::nullopt, {});
  std::vector<double> p;
  p.reserve(msgs.size());
  for (const auto& m : msgs) p.push_back(m.power_dbm);
  PowerRange r{percentile(p, 0.005), percentile(p, 0.995)};
  if (!(r.hi_dbm > r.lo_dbm)) r.hi_dbm = r.lo_dbm + 1.0;
  return r;
}

SpotModel init_model(const PtaParams& beam, const Dataset& train, const SystemConfig& cfg, const DerivedGrids& grids,
                     std::uint64_t seed) {
  if (train.users.empty()) throw Error("init_model: empty training set");
  SpotModel m;
  m.beam = beam;
  m.quantizer = calibrate_power_range(beam, train.users, cfg, grids, derive_seed(seed, 0xca1));
  m.scaling.power = m.quantizer;
  m.scaling.num_subcarriers = cfg.num_subcarriers;
  double mean_range = 0.0;
  for (const auto& u : train.users) mean_range += u.range_m;
  mean_range /= static_cast<double>(train.size());
  m.mlp = init_mlp(default_mlp_dims(), derive_seed(seed, 0x31f), mean_range);
  return m;
}

LossReport evaluate(const SpotModel& model, const Dataset& data, const SystemConfig& cfg, const DerivedGrids& grids,
                    std::optional<std::uint64_t> noise_seed) {
  std::vector<std::uint64_t> seeds;
  if (noise_seed) seeds = sample_noise_seeds(*noise_seed, data.size());
  const auto est = localize(model, data.users, seeds, cfg, grids);
  return loss_rmse(est, data.users);
}

std::uint64_t validation_noise_seed(const TrainOptions& opts) { return derive_seed(opts.seed, 0x7a1); }

TrainResult train(const SpotModel& start, const Dataset& train_set, const Dataset& val_set, const SystemConfig& cfg,
                  const DerivedGrids& grids, const TrainOptions& opts) {
  if (train_set.users.empty() || val_set.users.empty()) throw Error("train: empty split");
  if (opts.batch_size == 0 || opts.max_epochs < 0) throw Error("train: invalid options");
  const std::size_t M = static_cast<std::size_t>(cfg.num_subcarriers);
  const std::size_t K = train_set.size();
  const std::uint64_t val_seed = validation_noise_seed(opts);
  const std::optional<std::uint64_t> val_noise = opts.noisy ? std::optional<std::uint64_t>(val_seed) : std::nullopt;

  SpotModel model = start;
  model.bits = opts.bits;
  BeamCoordinates coords = to_coordinates(model.beam, cfg);

  // Parameter groups: beam coordinates first (when trained), then every
  // estimator weight and bias in layer order.
  Flat flat;
  if (opts.train_beam) {
    flat.params.push_back(&coords.carrier_phase);
    flat.params.push_back(&coords.delay_units);
    flat.lr_scales.assign(2, opts.beam_lr_scale);
  }
  for (std::size_t l = 0; l < model.mlp.num_layers(); ++l) {
    flat.params.push_back(&model.mlp.weights[l]);
    flat.params.push_back(&model.mlp.biases[l]);
    flat.lr_scales.push_back(1.0);
    flat.lr_scales.push_back(1.0);
  }
  std::vector<std::size_t> sizes;
  for (auto* p : flat.params) sizes.push_back(p->size());
  Adam adam(sizes, opts.adam, flat.lr_scales);

  // Fixed beam: the noiseless field never changes, so compute it once.
  std::vector<cplx> cached_field;
  ProjectedPta fixed_proj;
  if (!opts.train_beam) {
    fixed_proj = project_params(model.beam, cfg);
    if (K * M <= kFieldCacheLimit) cached_field = pta_field(train_set.users, fixed_proj, cfg, grids);
  }

  TrainResult result;
  result.initial_val_rmse = evaluate(model, val_set, cfg, grids, val_noise).rmse_2d_m;
  result.best = model;
  result.best_val_rmse = result.initial_val_rmse;
  double plateau_best = result.initial_val_rmse;
  int since_best = 0, since_plateau_best = 0;

  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<UserPosition> batch_users;
  std::vector<std::uint64_t> batch_seeds;

  int epoch = 0;
  for (epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(derive_seed(opts.seed, 0x5f, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double se_sum = 0.0;

    for (std::size_t b0 = 0; b0 < K; b0 += opts.batch_size) {
      const std::size_t B = std::min(opts.batch_size, K - b0);
      batch_users.resize(B);
      batch_seeds.resize(B);
      for (std::size_t i = 0; i < B; ++i) {
        batch_users[i] = train_set.users[order[b0 + i]];
        batch_seeds[i] = derive_seed(opts.seed, static_cast<std::uint64_t>(epoch) << 32, order[b0 + i]);
      }

      ad::Tape tape;
      ad::Value phase_leaf, delay_leaf, field;
      if (opts.train_beam) {
        phase_leaf = tape.parameter({coords.carrier_phase.size()}, coords.carrier_phase);
        delay_leaf = tape.parameter({coords.delay_units.size()}, coords.delay_units);
        field = taped_received_field(phase_leaf, delay_leaf, batch_users, cfg, grids);
      } else {
        std::vector<cplx> f(B * M);
        if (!cached_field.empty()) {
          for (std::size_t i = 0; i < B; ++i) {
            std::copy_n(cached_field.begin() + static_cast<std::ptrdiff_t>(order[b0 + i] * M), M,
                        f.begin() + static_cast<std::ptrdiff_t>(i * M));
          }
        } else {
          f = pta_field(batch_users, fixed_proj, cfg, grids);
        }
        field = tape.constant({B, M}, std::move(f));
      }
      const ad::Value noise = opts.noisy ? taped_noise(tape, batch_seeds, cfg, grids) : ad::Value{};
      const TapedMlp mlp = make_taped_mlp(tape, model.mlp);
      const auto est = taped_localize(field, noise, mlp, model.scaling, model.bits, model.quantizer, cfg, opts.feedback_path);
      const auto loss = taped_rmse(est, batch_users);
      if (!std::isfinite(loss.item())) {
        std::ostringstream os;
        os << "training diverged: non-finite loss at epoch " << epoch << ", batch starting at " << b0;
        throw Error(os.str());
      }
      tape.backward(loss);
      se_sum += loss.item() * loss.item() * static_cast<double>(B);

      std::vector<std::span<const double>> grads;
      if (opts.train_beam) {
        grads.push_back(phase_leaf.grad());
        grads.push_back(delay_leaf.grad());
      }
      for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
        grads.push_back(mlp.weights[l].grad());
        grads.push_back(mlp.biases[l].grad());
      }
      for (const auto& g : grads) {
        for (double v : g) {
          if (!std::isfinite(v)) throw Error("training diverged: non-finite gradient at epoch " + std::to_string(epoch));
        }
      }
      std::vector<std::span<double>> params;
      for (auto* p : flat.params) params.emplace_back(*p);
      adam.step(params, grads);
    }

    if (opts.train_beam) model.beam = from_coordinates(coords, cfg);
    EpochLog log;
    log.epoch = epoch;
    log.train_rmse = std::sqrt(se_sum / static_cast<double>(K));
    log.val_rmse = evaluate(model, val_set, cfg, grids, val_noise).rmse_2d_m;
    log.lr = adam.lr();
    result.log.push_back(log);
    if (opts.on_epoch) opts.on_epoch(log);

    if (log.val_rmse < result.best_val_rmse) {
      result.best_val_rmse = log.val_rmse;
      result.best = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (log.val_rmse < plateau_best) {
      plateau_best = log.val_rmse;
      since_plateau_best = 0;
    } else if (++since_plateau_best >= opts.lr_patience) {
      adam.set_lr(adam.lr() * opts.lr_decay);
      since_plateau_best = 0;
    }
    if (since_best >= opts.early_stop_patience) break;
  }

  // Without quantization in the loop the quantizer range is unused during
  // training, but it was calibrated for the starting beam. A learned beam
  // moves the power distribution, so re-fit the range to the beam returned.
  if (opts.train_beam && !opts.bits) {
    result.best.quantizer =
        calibrate_power_range(result.best.beam, train_set.users, cfg, grids, derive_seed(opts.seed, 0xca1));
  }
  result.final_state.model = model;
  result.final_state.moments = adam.groups();
  result.final_state.steps = adam.steps();
  result.final_state.epoch = std::min(epoch, opts.max_epochs);
  result.final_state.best_val_rmse = result.best_val_rmse;
  return result;
}

}  // namespace ptaloc
