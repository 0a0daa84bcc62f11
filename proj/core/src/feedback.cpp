#include "ptaloc/feedback.hpp"

#include <cmath>

#include "ptaloc/config.hpp"
#include "ptaloc/error.hpp"
#include "ptaloc/kernels.hpp"

namespace ptaloc {

namespace {

void check_quantizer(int bits, const PowerRange& range) {
  if (bits < 1 || bits > 16) throw Error("quantizer bits must be within 1..16");
  if (!(range.hi_dbm > range.lo_dbm) || !std::isfinite(range.lo_dbm) || !std::isfinite(range.hi_dbm)) {
    throw Error("quantizer range must satisfy lo < hi");
  }
}

}  // namespace

std::vector<double> softmax_weights(std::span<const double> powers, double alpha) {
  if (!(alpha > 0.0)) throw Error("softmax temperature must be positive");
  if (powers.empty()) throw Error("softmax over an empty power vector");
  for (double p : powers) {
    if (!std::isfinite(p)) throw Error("softmax input is not finite");
  }
  std::vector<double> w(powers.size());
  kernels::softmax_scaled_row(powers.data(), powers.size(), alpha, w.data());
  return w;
}

SoftSelection soft_index(std::span<const double> weights, std::span<const double> powers) {
  if (weights.size() != powers.size() || weights.empty()) throw Error("soft_index: length mismatch");
  SoftSelection s;
  double idx = 0.0, pw = 0.0;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    idx += weights[m] * static_cast<double>(m + 1);
    pw += weights[m] * powers[m];
  }
  s.soft_index = idx;
  s.hard_index = std::clamp(static_cast<int>(std::round(idx)), 1, static_cast<int>(weights.size()));
  s.expected_power = pw;
  s.selected_power = powers[static_cast<std::size_t>(s.hard_index - 1)];
  return s;
}

double quantize_power(double power_dbm, int bits, const PowerRange& range) {
  check_quantizer(bits, range);
  return kernels::quantize_midrise(power_dbm, bits, range.lo_dbm, range.hi_dbm);
}

FeedbackMessage measure_feedback(std::span<const double> powers_w, double alpha, std::optional<int> bits,
                                 const PowerRange& range) {
  std::vector<double> scaled(powers_w.size());
  if (powers_w.empty()) throw Error("measure_feedback: empty power vector");
  kernels::max_normalize_row(powers_w.data(), powers_w.size(), scaled.data());
  const auto w = softmax_weights(scaled, alpha);
  const auto sel = soft_index(w, powers_w);
  FeedbackMessage msg;
  msg.subcarrier_index = sel.hard_index;
  msg.power_dbm = watts_to_dbm(sel.selected_power);
  if (bits) {
    msg.power_dbm = quantize_power(msg.power_dbm, *bits, range);
    msg.bits_used = bits;
  }
  return msg;
}

EncodedFeedback encode_feedback(const FeedbackMessage& msg, int bits, const PowerRange& range) {
  check_quantizer(bits, range);
  if (msg.subcarrier_index < 1) throw Error("encode_feedback: subcarrier index must be >= 1");
  const double cells = std::ldexp(1.0, bits);
  const double width = (range.hi_dbm - range.lo_dbm) / cells;
  const double cell = std::clamp(std::floor((msg.power_dbm - range.lo_dbm) / width), 0.0, cells - 1.0);
  return {static_cast<std::uint32_t>(msg.subcarrier_index - 1), static_cast<std::uint32_t>(cell)};
}

FeedbackMessage decode_feedback(const EncodedFeedback& code, int bits, const PowerRange& range) {
  check_quantizer(bits, range);
  const double width = (range.hi_dbm - range.lo_dbm) / std::ldexp(1.0, bits);
  FeedbackMessage msg;
  msg.subcarrier_index = static_cast<int>(code.index_code) + 1;
  msg.power_dbm = range.lo_dbm + (static_cast<double>(code.power_code) + 0.5) * width;
  msg.bits_used = bits;
  return msg;
}

int index_bits(int num_subcarriers) {
  if (num_subcarriers < 1) throw Error("index_bits: need at least one subcarrier");
  int bits = 0;
  while ((1LL << bits) < num_subcarriers) ++bits;
  return bits;
}

int feedback_bits_per_user(int num_subcarriers, int power_bits) { return index_bits(num_subcarriers) + power_bits; }

}  // namespace ptaloc
