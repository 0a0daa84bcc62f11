#include "ptaloc/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ptaloc/error.hpp"

namespace ptaloc {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

const std::string& require(const std::map<std::string, std::string>& raw, const std::string& key) {
  auto it = raw.find(key);
  if (it == raw.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

double parse_double(const std::string& key, const std::string& value) {
  // std::from_chars for double is available in libstdc++ 11.
  double out = 0.0;
  const char* begin = value.data();
  const char* end = begin + value.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end || !std::isfinite(out)) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a number");
  }
  return out;
}

long long parse_int(const std::string& key, const std::string& value) {
  long long out = 0;
  const char* begin = value.data();
  const char* end = begin + value.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as an integer");
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    out[std::string(key)] = std::string(value);
  }
  return out;
}

SystemConfig build_config(const std::map<std::string, std::string>& raw) {
  SystemConfig cfg;
  auto num = [&](const std::string& key) { return parse_double(key, require(raw, key)); };
  auto opt_num = [&](const std::string& key, double fallback) {
    auto it = raw.find(key);
    return it == raw.end() ? fallback : parse_double(key, it->second);
  };

  cfg.carrier_freq_hz = num("carrier_freq_hz");
  cfg.bandwidth_hz = num("bandwidth_hz");
  cfg.subcarrier_spacing_hz = num("subcarrier_spacing_hz");
  cfg.num_antennas = static_cast<int>(parse_int("num_antennas", require(raw, "num_antennas")));
  cfg.num_subcarriers = static_cast<int>(parse_int("num_subcarriers", require(raw, "num_subcarriers")));
  cfg.noise_psd_dbm_per_hz = num("noise_psd_dbm_per_hz");
  cfg.tx_power_dbm = num("tx_power_dbm");
  cfg.range_min_m = num("range_min_m");
  cfg.range_max_m = num("range_max_m");

  cfg.speed_of_light_m_per_s = opt_num("speed_of_light_m_per_s", 3e8);
  cfg.angle_bound_rad = opt_num("angle_bound_deg", 60.0) * std::numbers::pi / 180.0;
  cfg.softmax_temperature = opt_num("softmax_temperature", 20.0);
  if (auto it = raw.find("quantization_bits"); it != raw.end() && it->second != "none") {
    cfg.quantization_bits = static_cast<int>(parse_int("quantization_bits", it->second));
  }
  if (auto it = raw.find("rng_seed"); it != raw.end()) {
    const auto seed = parse_int("rng_seed", it->second);
    if (seed < 0) throw ConfigError("rng_seed must be non-negative");
    cfg.rng_seed = static_cast<std::uint64_t>(seed);
  }
  if (auto it = raw.find("angle_convention"); it != raw.end()) {
    if (it->second == "boresight") {
      cfg.angle_convention = AngleConvention::boresight;
    } else if (it->second == "axis") {
      cfg.angle_convention = AngleConvention::axis;
    } else {
      throw ConfigError("angle_convention must be 'boresight' or 'axis'");
    }
  }

  validate(cfg);
  return cfg;
}

SystemConfig build_config(std::string_view text) { return build_config(parse_key_values(text)); }

SystemConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return build_config(ss.str());
}

void validate(const SystemConfig& cfg) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(cfg.carrier_freq_hz, "carrier_freq_hz");
  positive(cfg.bandwidth_hz, "bandwidth_hz");
  positive(cfg.subcarrier_spacing_hz, "subcarrier_spacing_hz");
  positive(cfg.speed_of_light_m_per_s, "speed_of_light_m_per_s");
  positive(cfg.angle_bound_rad, "angle_bound_deg");
  positive(cfg.range_min_m, "range_min_m");
  positive(cfg.softmax_temperature, "softmax_temperature");
  if (cfg.num_antennas < 2) throw ConfigError("num_antennas must be at least 2");
  if (cfg.num_subcarriers < 2) throw ConfigError("num_subcarriers must be at least 2");
  if (!(cfg.range_max_m > cfg.range_min_m)) throw ConfigError("range_max_m must exceed range_min_m");
  if (cfg.angle_bound_rad > std::numbers::pi / 2) throw ConfigError("angle_bound_deg must not exceed 90");
  if (cfg.quantization_bits && (*cfg.quantization_bits < 1 || *cfg.quantization_bits > 16)) {
    throw ConfigError("quantization_bits must be within 1..16");
  }
  if (!std::isfinite(cfg.noise_psd_dbm_per_hz) || !std::isfinite(cfg.tx_power_dbm)) {
    throw ConfigError("power levels must be finite");
  }
  const double grid_bw = cfg.num_subcarriers * cfg.subcarrier_spacing_hz;
  if (std::abs(grid_bw - cfg.bandwidth_hz) > 1e-9 * cfg.bandwidth_hz) {
    throw ConfigError("subcarrier grid mismatch: num_subcarriers * subcarrier_spacing_hz = " +
                      fmt_double(grid_bw) + " Hz but bandwidth_hz = " + fmt_double(cfg.bandwidth_hz));
  }
}

std::string to_text(const SystemConfig& cfg) {
  std::ostringstream os;
  os << "carrier_freq_hz = " << fmt_double(cfg.carrier_freq_hz) << '\n'
     << "bandwidth_hz = " << fmt_double(cfg.bandwidth_hz) << '\n'
     << "subcarrier_spacing_hz = " << fmt_double(cfg.subcarrier_spacing_hz) << '\n'
     << "num_antennas = " << cfg.num_antennas << '\n'
     << "num_subcarriers = " << cfg.num_subcarriers << '\n'
     << "noise_psd_dbm_per_hz = " << fmt_double(cfg.noise_psd_dbm_per_hz) << '\n'
     << "tx_power_dbm = " << fmt_double(cfg.tx_power_dbm) << '\n'
     << "speed_of_light_m_per_s = " << fmt_double(cfg.speed_of_light_m_per_s) << '\n'
     << "angle_bound_deg = " << fmt_double(cfg.angle_bound_rad * 180.0 / std::numbers::pi) << '\n'
     << "range_min_m = " << fmt_double(cfg.range_min_m) << '\n'
     << "range_max_m = " << fmt_double(cfg.range_max_m) << '\n'
     << "softmax_temperature = " << fmt_double(cfg.softmax_temperature) << '\n'
     << "angle_convention = "
     << (cfg.angle_convention == AngleConvention::boresight ? "boresight" : "axis") << '\n';
  return os.str();
}

std::uint64_t config_hash(const SystemConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_text(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

DerivedGrids derive_grids(const SystemConfig& cfg) {
  validate(cfg);
  DerivedGrids g;
  const int M = cfg.num_subcarriers;
  const int N = cfg.num_antennas;
  g.subcarrier_freqs_hz.resize(M);
  for (int m = 1; m <= M; ++m) {
    g.subcarrier_freqs_hz[m - 1] =
        cfg.carrier_freq_hz + 0.5 * static_cast<double>(2 * m - 1 - M) * cfg.subcarrier_spacing_hz;
  }
  g.antenna_offsets.resize(N);
  for (int n = 1; n <= N; ++n) g.antenna_offsets[n - 1] = n - 0.5 * (N + 1);
  g.tx_amplitude = std::sqrt(dbm_to_watts(cfg.tx_power_dbm) / M);
  g.noise_power_w = dbm_to_watts(cfg.noise_psd_dbm_per_hz) * cfg.subcarrier_spacing_hz;
  return g;
}

double rayleigh_distance(const SystemConfig& cfg) {
  const double aperture = (cfg.num_antennas - 1) * cfg.antenna_spacing_m();
  return 2.0 * aperture * aperture / cfg.wavelength_m();
}

SystemConfig full_scale_config() {
  SystemConfig cfg;
  validate(cfg);
  return cfg;
}

SystemConfig desk_scale_config() {
  SystemConfig cfg;
  cfg.num_antennas = 64;
  cfg.num_subcarriers = 256;
  cfg.bandwidth_hz = 256 * cfg.subcarrier_spacing_hz;
  cfg.range_min_m = 5.0;
  cfg.range_max_m = 50.0;
  validate(cfg);
  return cfg;
}

}  // namespace ptaloc
