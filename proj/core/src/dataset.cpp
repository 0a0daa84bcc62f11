#include "ptaloc/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include "ptaloc/csv.hpp"
#include "ptaloc/error.hpp"

namespace ptaloc {

namespace {

constexpr char kMagic[8] = {'P', 'T', 'A', 'L', 'D', 'S', '0', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kBlock = 4096;
constexpr std::size_t kHeaderBytes = 40;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f64(std::vector<unsigned char>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

const char* to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

bool Dataset::operator==(const Dataset& o) const {
  if (split != o.split || seed != o.seed || config_hash != o.config_hash || users.size() != o.users.size()) {
    return false;
  }
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto& a = users[i];
    const auto& b = o.users[i];
    if (a.angle_rad != b.angle_rad || a.range_m != b.range_m || a.x_m != b.x_m || a.y_m != b.y_m) return false;
  }
  return true;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

Dataset sample_users(std::size_t count, const SystemConfig& cfg, std::uint64_t seed, Split split) {
  validate(cfg);
  if (count == 0) throw Error("sample_users: count must be at least 1");
  Dataset d;
  d.split = split;
  d.seed = seed;
  d.config_hash = config_hash(cfg);
  d.users.reserve(count);
  for (std::size_t block = 0; block * kBlock < count; ++block) {
    std::mt19937_64 rng(derive_seed(seed, block));
    std::uniform_real_distribution<double> angle(-cfg.angle_bound_rad, cfg.angle_bound_rad);
    std::uniform_real_distribution<double> range(cfg.range_min_m, cfg.range_max_m);
    const std::size_t end = std::min(count, (block + 1) * kBlock);
    for (std::size_t i = block * kBlock; i < end; ++i) {
      const double a = angle(rng);
      const double r = range(rng);
      d.users.push_back(UserPosition::from_polar(a, r));
    }
  }
  return d;
}

DatasetSplits make_splits(const SystemConfig& cfg, std::size_t n_train, std::size_t n_val, std::size_t n_test,
                          std::uint64_t seed) {
  return {sample_users(n_train, cfg, derive_seed(seed, 0x7472), Split::train),
          sample_users(n_val, cfg, derive_seed(seed, 0x7661), Split::val),
          sample_users(n_test, cfg, derive_seed(seed, 0x7465), Split::test)};
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::vector<unsigned char> buf(std::begin(kMagic), std::end(kMagic));
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(data.split));
  put_u64(buf, data.seed);
  put_u64(buf, data.config_hash);
  put_u64(buf, data.users.size());
  for (const auto& u : data.users) {
    put_f64(buf, u.angle_rad);
    put_f64(buf, u.range_m);
  }
  put_u64(buf, fnv1a(buf.data(), buf.size()));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("failed writing '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset '" + path + "'");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < kHeaderBytes + 8) throw FormatError("dataset '" + path + "' is truncated");
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError("'" + path + "' is not a dataset file");
  if (get_u32(buf.data() + 8) != kVersion) throw FormatError("unsupported dataset version in '" + path + "'");
  const std::uint32_t split = get_u32(buf.data() + 12);
  if (split > 2) throw FormatError("bad split tag in '" + path + "'");
  const std::uint64_t count = get_u64(buf.data() + 32);
  if (count > (buf.size() - kHeaderBytes - 8) / 16 || buf.size() != kHeaderBytes + count * 16 + 8) {
    throw FormatError("dataset '" + path + "' is truncated or has trailing bytes");
  }
  const std::size_t body = buf.size() - 8;
  if (get_u64(buf.data() + body) != fnv1a(buf.data(), body)) {
    throw FormatError("dataset '" + path + "' failed its checksum");
  }
  Dataset d;
  d.split = static_cast<Split>(split);
  d.seed = get_u64(buf.data() + 16);
  d.config_hash = get_u64(buf.data() + 24);
  d.users.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const unsigned char* p = buf.data() + kHeaderBytes + i * 16;
    const double a = std::bit_cast<double>(get_u64(p));
    const double r = std::bit_cast<double>(get_u64(p + 8));
    d.users.push_back(UserPosition::from_polar(a, r));
  }
  return d;
}

Dataset load_dataset(const std::string& path, const SystemConfig& cfg) {
  Dataset d = load_dataset(path);
  const auto expected = config_hash(cfg);
  if (d.config_hash != expected) {
    throw HashMismatchError("dataset '" + path + "' was generated for config " + hash_hex(d.config_hash) +
                            ", active config is " + hash_hex(expected));
  }
  return d;
}

void export_dataset_csv(const Dataset& data, const std::string& path) {
  CsvWriter csv(path, {{"config_hash", hash_hex(data.config_hash)},
                       {"seed", std::to_string(data.seed)},
                       {"split", to_string(data.split)}});
  csv.header({"angle_deg", "range_m", "x_m", "y_m"});
  for (const auto& u : data.users) {
    csv.row({u.angle_rad * 180.0 / std::numbers::pi, u.range_m, u.x_m, u.y_m});
  }
}

}  // namespace ptaloc
