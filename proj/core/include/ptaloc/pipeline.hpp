#pragma once

// The localization chain for batches of users:
//   channel -> beam -> received powers -> feedback -> features -> estimator.
// Two forms share the same kernels: a plain deployed path (hard index,
// power at that index) and a taped training path (soft index, expected power).

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ptaloc/autodiff.hpp"
#include "ptaloc/beamformer.hpp"
#include "ptaloc/config.hpp"
#include "ptaloc/feedback.hpp"
#include "ptaloc/geometry.hpp"
#include "ptaloc/mlp.hpp"

namespace ptaloc {

/// Everything needed to localize a user from one downlink symbol.
struct SpotModel {
  PtaParams beam;
  MlpParams mlp;
  FeatureScaling scaling;
  std::optional<int> bits;  // quantized power feedback when set
  PowerRange quantizer;     // quantizer cells span this range
};

/// Per-sample noise seed used by evaluation: derive_seed(base, index).
std::vector<std::uint64_t> sample_noise_seeds(std::uint64_t base, std::size_t count, std::uint64_t salt = 0);

/// Noiseless s * h^H w for each user, (K x M) row-major. `weights` is the
/// (M x N) matrix from beam_weight_matrix.
std::vector<cplx> received_field(std::span<const UserPosition> users, std::span<const cplx> weights,
                                 const SystemConfig& cfg, const DerivedGrids& grids);

/// |field + noise|^2 in watts. `noise_seeds` is empty (noiseless) or one seed per user.
std::vector<double> received_powers(std::span<const cplx> field, std::span<const std::uint64_t> noise_seeds,
                                    const SystemConfig& cfg, const DerivedGrids& grids);

/// Deployed feedback for every row of a (K x M) power matrix.
std::vector<FeedbackMessage> hard_feedback(std::span<const double> powers, const SystemConfig& cfg,
                                           std::optional<int> bits, const PowerRange& range);

/// Training-path quantities for every row: soft index and sum_m w_m p_m in dBm.
struct SoftFeedback {
  std::vector<double> soft_index;
  std::vector<double> power_dbm;
};
SoftFeedback soft_feedback(std::span<const double> powers, const SystemConfig& cfg);

/// (K x 2) estimator features from deployed feedback.
std::vector<double> feedback_features(std::span<const FeedbackMessage> msgs, const FeatureScaling& scaling);

/// Deployed localization of a batch of users.
std::vector<PositionEstimate> localize(const SpotModel& model, std::span<const UserPosition> users,
                                       std::span<const std::uint64_t> noise_seeds, const SystemConfig& cfg,
                                       const DerivedGrids& grids);

/// Feedback only, for a fixed beam. Used by estimators that are not the MLP.
std::vector<FeedbackMessage> measure_users(const PtaParams& beam, std::span<const UserPosition> users,
                                           std::span<const std::uint64_t> noise_seeds, const SystemConfig& cfg,
                                           const DerivedGrids& grids, std::optional<int> bits,
                                           const PowerRange& range);

// ---- Taped training path ----------------------------------------------------

/// Complex (K x M) received signal on the tape for trainable beam coordinates.
ad::Value taped_received_field(const ad::Value& carrier_phase, const ad::Value& delay_units,
                               std::span<const UserPosition> users, const SystemConfig& cfg,
                               const DerivedGrids& grids);

/// What the estimator sees during training.
///  - soft: soft index and expected power, differentiable end to end.
///  - straight_through: the deployed rounded index and the power at that
///    index in the forward pass; gradients of the soft quantities backward.
enum class FeedbackPath { soft, straight_through };

/// From a complex (K x M) received signal through feedback and the estimator
/// to per-user Cartesian estimates. Adds `noise` (same shape, constant) when
/// valid.
TapedEstimate taped_localize(const ad::Value& field, const ad::Value& noise, const TapedMlp& mlp,
                             const FeatureScaling& scaling, std::optional<int> bits, const PowerRange& quantizer,
                             const SystemConfig& cfg, FeedbackPath path = FeedbackPath::soft);

/// sqrt(mean((x - x_k)^2 + (y - y_k)^2)) over the batch.
ad::Value taped_rmse(const TapedEstimate& est, std::span<const UserPosition> truths);

/// Complex noise samples (K x M) as a tape constant, one seed per user.
ad::Value taped_noise(ad::Tape& tape, std::span<const std::uint64_t> seeds, const SystemConfig& cfg,
                      const DerivedGrids& grids);

}  // namespace ptaloc
