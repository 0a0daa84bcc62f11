#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ptaloc/adam.hpp"
#include "ptaloc/dataset.hpp"
#include "ptaloc/pipeline.hpp"

namespace ptaloc {

struct LossReport {
  double rmse_2d_m = 0.0;
  double angle_rmse_rad = 0.0;
  double range_rmse_m = 0.0;
  std::vector<double> squared_errors;  // per sample, (x^ - x)^2 + (y^ - y)^2
};

/// Throws Error on an empty batch or a length mismatch.
LossReport loss_rmse(std::span<const PositionEstimate> estimates, std::span<const UserPosition> truths);

/// RMSE of always answering the training-set centroid.
double centroid_rmse(const Dataset& train, const Dataset& eval);

/// 0.5th and 99.5th percentile of deployed feedback power over `users`.
PowerRange calibrate_power_range(const PtaParams& beam, std::span<const UserPosition> users,
                                 const SystemConfig& cfg, const DerivedGrids& grids, std::uint64_t noise_seed);

/// Fresh model around `beam`: calibrated feature scaling and quantizer range,
/// He-initialised estimator with the range bias at the mean training range.
SpotModel init_model(const PtaParams& beam, const Dataset& train, const SystemConfig& cfg, const DerivedGrids& grids,
                     std::uint64_t seed);

struct EpochLog {
  int epoch = 0;
  double train_rmse = 0.0;
  double val_rmse = 0.0;
  double lr = 0.0;
};

struct TrainOptions {
  std::size_t batch_size = 256;
  int max_epochs = 300;
  int early_stop_patience = 30;
  int lr_patience = 10;
  double lr_decay = 0.5;
  AdamOptions adam;
  double beam_lr_scale = 1.0;  // multiplier on the beam coordinates' learning rate
  bool train_beam = true;
  bool noisy = true;
  std::optional<int> bits;  // quantization-aware training when set
  FeedbackPath feedback_path = FeedbackPath::straight_through;
  std::uint64_t seed = 1;
  std::function<void(const EpochLog&)> on_epoch;
};

/// Optimizer-visible state at the end of a run.
struct TrainState {
  SpotModel model;  // parameters after the last epoch
  std::vector<Adam::Group> moments;
  std::int64_t steps = 0;
  int epoch = 0;
  double best_val_rmse = 0.0;
};

struct TrainResult {
  SpotModel best;  // selected by validation RMSE on the deployed path
  double best_val_rmse = 0.0;
  double initial_val_rmse = 0.0;
  int best_epoch = 0;  // 0 means the starting model was never beaten
  std::vector<EpochLog> log;
  TrainState final_state;
};

/// Deployed-path evaluation with per-sample noise seeds derived from
/// `noise_seed` (noiseless when empty). Deterministic.
LossReport evaluate(const SpotModel& model, const Dataset& data, const SystemConfig& cfg, const DerivedGrids& grids,
                    std::optional<std::uint64_t> noise_seed);

/// Minimizes the training RMSE with Adam, feeding the estimator as chosen by
/// TrainOptions::feedback_path. The validation RMSE on the deployed path
/// drives learning-rate decay, early stopping and model selection. When the
/// beam is trained without quantization, the returned model's quantizer range
/// is re-calibrated for its beam on the training users.
/// Throws Error if the loss becomes non-finite.
TrainResult train(const SpotModel& start, const Dataset& train_set, const Dataset& val_set, const SystemConfig& cfg,
                  const DerivedGrids& grids, const TrainOptions& opts);

/// Noise seed the trainer uses for validation, so callers can reproduce it.
std::uint64_t validation_noise_seed(const TrainOptions& opts);

}  // namespace ptaloc
