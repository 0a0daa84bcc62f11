#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ptaloc {

/// How UserPosition::angle_rad is measured.
///  - boresight: 0 rad is broadside, users sampled symmetrically around it.
///  - axis: angle measured from the array axis (0 rad is endfire).
enum class AngleConvention { boresight, axis };

/// Physical and array constants. Immutable once built; share freely.
struct SystemConfig {
  double carrier_freq_hz = 28e9;
  double bandwidth_hz = 380.16e6;
  double subcarrier_spacing_hz = 240e3;
  int num_antennas = 256;
  int num_subcarriers = 1584;
  double noise_psd_dbm_per_hz = -174.0;
  double tx_power_dbm = 40.0;
  double speed_of_light_m_per_s = 3e8;
  double angle_bound_rad = 1.0471975511965976;  // pi/3
  double range_min_m = 5.0;
  double range_max_m = 300.0;
  double softmax_temperature = 20.0;
  std::optional<int> quantization_bits;
  std::uint64_t rng_seed = 0;
  AngleConvention angle_convention = AngleConvention::boresight;

  double antenna_spacing_m() const { return speed_of_light_m_per_s / (2.0 * carrier_freq_hz); }
  double wavelength_m() const { return speed_of_light_m_per_s / carrier_freq_hz; }
  /// Upper end of the true-time-delay range, 1/f_scs.
  double max_delay_s() const { return 1.0 / subcarrier_spacing_hz; }
};

/// Frequency and spatial grids derived from a SystemConfig.
struct DerivedGrids {
  std::vector<double> subcarrier_freqs_hz;  // f_m, m = 1..M stored at [m-1]
  std::vector<double> antenna_offsets;      // x_n = n - (N+1)/2
  double tx_amplitude = 0.0;                // |s_m|, identical for every subcarrier
  double noise_power_w = 0.0;               // per-subcarrier noise variance
};

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

/// Parses flat `key = value` text. Blank lines and `#` comments are ignored.
std::map<std::string, std::string> parse_key_values(std::string_view text);

/// Builds and validates a config. Throws ConfigError on missing keys,
/// unparsable numbers, non-physical values or an M*f_scs != B grid mismatch.
SystemConfig build_config(const std::map<std::string, std::string>& raw);
SystemConfig build_config(std::string_view text);
SystemConfig load_config_file(const std::string& path);

/// Throws ConfigError if any invariant is violated.
void validate(const SystemConfig& cfg);

/// Canonical key=value rendering; parses back to an identical config.
std::string to_text(const SystemConfig& cfg);

/// FNV-1a over the canonical text. Physical keys only (rng_seed excluded).
std::uint64_t config_hash(const SystemConfig& cfg);
std::string hash_hex(std::uint64_t hash);

DerivedGrids derive_grids(const SystemConfig& cfg);

/// 2 D^2 / lambda with aperture D = (N - 1) d.
double rayleigh_distance(const SystemConfig& cfg);

/// N = 256, M = 1584, 380.16 MHz band, users within 5..300 m.
SystemConfig full_scale_config();
/// N = 64, M = 256, users within 5..50 m.
SystemConfig desk_scale_config();

}  // namespace ptaloc
