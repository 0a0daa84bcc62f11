#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptaloc/config.hpp"
#include "ptaloc/geometry.hpp"

namespace ptaloc {

enum class Split : std::uint32_t { train = 0, val = 1, test = 2 };

const char* to_string(Split split);

struct Dataset {
  std::vector<UserPosition> users;
  Split split = Split::train;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;

  std::size_t size() const { return users.size(); }
  bool operator==(const Dataset&) const;
};

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// splitmix64-style mixing, used wherever a seed is derived from another.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Angle ~ U[-bound, bound], range ~ U[range_min, range_max] (uniform in
/// metres). Deterministic in (count, cfg, seed); generated in fixed blocks of
/// 4096 records, each from its own derived seed.
Dataset sample_users(std::size_t count, const SystemConfig& cfg, std::uint64_t seed, Split split = Split::train);

/// Three independent draws; each split gets its own derived seed.
DatasetSplits make_splits(const SystemConfig& cfg, std::size_t n_train, std::size_t n_val, std::size_t n_test,
                          std::uint64_t seed);

/// Binary layout, little-endian:
///   magic "PTALDS01" | u32 version (1) | u32 split | u64 seed | u64 config hash |
///   u64 count | count x (f64 angle_rad, f64 range_m) | u64 FNV-1a of all prior bytes
void save_dataset(const Dataset& data, const std::string& path);

/// Throws FormatError on a malformed or truncated file.
Dataset load_dataset(const std::string& path);
/// As above, and throws HashMismatchError when the file was generated under another config.
Dataset load_dataset(const std::string& path, const SystemConfig& cfg);

/// Columns: angle_deg, range_m, x_m, y_m; header comment carries hash and seed.
void export_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace ptaloc
