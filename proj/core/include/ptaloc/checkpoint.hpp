#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ptaloc/cbs.hpp"
#include "ptaloc/dataset.hpp"
#include "ptaloc/pipeline.hpp"
#include "ptaloc/trainer.hpp"

namespace ptaloc {

enum class CheckpointKind { trained, analytic };

/// One file holds the beam, the estimator (trained kind only), the feature
/// and quantizer calibration, and the hash of the config it was built under.
struct Checkpoint {
  CheckpointKind kind = CheckpointKind::trained;
  std::uint64_t config_hash = 0;
  SpotModel model;
  bool has_estimator = true;
  std::optional<Anchor> start;  // analytic designs only
  std::optional<Anchor> end;
  std::uint64_t seed = 0;
  int best_epoch = 0;
  double best_val_rmse = 0.0;
};

inline constexpr int kCheckpointVersion = 1;

Checkpoint make_checkpoint(const TrainResult& result, const SystemConfig& cfg, std::uint64_t seed);
Checkpoint make_checkpoint(const CbsDesign& design, const SystemConfig& cfg);

/// JSON. Doubles are written with enough digits to round-trip exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
/// Throws FormatError on malformed content or an unknown version.
Checkpoint load_checkpoint(const std::string& path);
/// Also throws HashMismatchError when the checkpoint belongs to another config.
Checkpoint load_checkpoint(const std::string& path, const SystemConfig& cfg);

/// Deployed-path RMSE of a trained checkpoint on a dataset. `bits` overrides
/// the checkpoint's quantization setting when given (0 means unquantized).
/// Throws HashMismatchError when checkpoint, dataset and config disagree.
LossReport evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& data, const SystemConfig& cfg,
                               const DerivedGrids& grids, std::optional<std::uint64_t> noise_seed,
                               std::optional<int> bits = std::nullopt);

}  // namespace ptaloc
