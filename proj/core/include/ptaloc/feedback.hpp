#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ptaloc {

/// Calibrated dBm interval for the power quantizer and feature scaling.
struct PowerRange {
  double lo_dbm = -100.0;
  double hi_dbm = -60.0;
};

/// What one user reports after a single downlink symbol.
struct FeedbackMessage {
  int subcarrier_index = 1;  // 1-based
  double power_dbm = 0.0;    // raw, or a cell midpoint when quantized
  std::optional<int> bits_used;
};

struct SoftSelection {
  double soft_index = 1.0;        // sum_m w_m m
  int hard_index = 1;             // round(soft_index), ties away from zero
  double expected_power = 0.0;    // sum_m w_m p_m (training path)
  double selected_power = 0.0;    // p at hard_index (deployed path)
};

/// w_m = exp(alpha p_m) / sum exp(alpha p_m'), evaluated with max subtraction.
/// Throws Error for alpha <= 0, empty or non-finite input.
std::vector<double> softmax_weights(std::span<const double> powers, double alpha);

/// Indices are 1-based. `weights` and `powers` must have equal length.
SoftSelection soft_index(std::span<const double> weights, std::span<const double> powers);

/// Uniform mid-rise quantizer over `range` with 2^bits cells. Inputs outside
/// the range land in the edge cells. Throws Error for bits outside 1..16 or
/// an empty range.
double quantize_power(double power_dbm, int bits, const PowerRange& range);

/// Full user-side measurement: powers (W) scaled to unit max, softmax at
/// temperature alpha, hard index, power at that index in dBm, optional
/// quantization.
FeedbackMessage measure_feedback(std::span<const double> powers_w, double alpha,
                                 std::optional<int> bits = std::nullopt, const PowerRange& range = {});

/// Uplink payload: index and power code as unsigned integers.
struct EncodedFeedback {
  std::uint32_t index_code = 0;  // subcarrier_index - 1
  std::uint32_t power_code = 0;  // quantizer cell
};

EncodedFeedback encode_feedback(const FeedbackMessage& msg, int bits, const PowerRange& range);
FeedbackMessage decode_feedback(const EncodedFeedback& code, int bits, const PowerRange& range);

/// ceil(log2 M).
int index_bits(int num_subcarriers);
/// Uplink bits per user: ceil(log2 M) + b.
int feedback_bits_per_user(int num_subcarriers, int power_bits);

}  // namespace ptaloc
