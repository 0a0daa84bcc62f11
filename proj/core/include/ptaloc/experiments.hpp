#pragma once

// The comparisons behind the CLI sweeps: learned beam vs the fixed analytic
// beam with a trained estimator vs the analytic beam with the lookup
// estimator, across service ranges and feedback bit widths. Every function
// is deterministic in its seeds; CSV writers embed the config hash and seed.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptaloc/cbs.hpp"
#include "ptaloc/dataset.hpp"
#include "ptaloc/trainer.hpp"

namespace ptaloc {

enum class BeamInit { cbs, ramp };

struct ExperimentSetup {
  SystemConfig cfg;
  std::size_t n_train = 10000;
  std::size_t n_val = 1000;
  std::size_t n_test = 1000;
  std::uint64_t seed = 1;
  TrainOptions train;  // seed and beam flag are set per run
  BeamInit spot_init = BeamInit::cbs;
  int qat_epochs = 60;  // budget per bit width when fine-tuning with quantized feedback
};

inline constexpr const char* kMethodSpot = "spot";
inline constexpr const char* kMethodFixed = "fixed_cbs_mlp";
inline constexpr const char* kMethodLookup = "cbs_lookup";

struct MethodScore {
  std::string method;
  LossReport val;
  LossReport test;
};

/// Everything produced by one paired run on one dataset draw.
struct AblationRun {
  SystemConfig cfg;
  std::uint64_t seed = 0;
  DatasetSplits data;
  CbsDesign cbs;
  TrainResult spot;
  TrainResult fixed;
  LookupTable lookup;
  std::vector<MethodScore> scores;  // spot, fixed, lookup in that order

  const MethodScore& score(const std::string& method) const;
};

/// Noise seeds for deployed-path scoring. Validation matches the trainer.
std::uint64_t val_noise_seed(const ExperimentSetup& setup);
std::uint64_t test_noise_seed(const ExperimentSetup& setup);

/// Deployed-path report of the lookup estimator on `data`.
LossReport evaluate_lookup(const PtaParams& beam, const LookupTable& table, const Dataset& data,
                           const SystemConfig& cfg, const DerivedGrids& grids, std::optional<std::uint64_t> noise_seed,
                           std::optional<int> bits, const PowerRange& range);

/// Trains the learned beam and the fixed-beam estimator, builds the lookup
/// table, and scores all three on validation and test.
AblationRun run_ablation(const ExperimentSetup& setup);

struct DistanceRow {
  double max_distance_m = 0.0;
  MethodScore score;
};

/// One ablation per maximum service distance (cfg.range_max_m replaced).
/// Throws Error on an empty grid or a distance not above range_min.
std::vector<DistanceRow> sweep_distance(const ExperimentSetup& setup, std::span<const double> max_distances_m);

inline constexpr const char* kMethodSpotQ = "spot_q";
inline constexpr const char* kMethodFixedQ = "fixed_q";
inline constexpr const char* kMethodSpotPostHoc = "spot_posthoc";

struct BitsRow {
  std::optional<int> bits;  // empty for the unquantized reference
  MethodScore score;
};

/// Quantization-aware fine-tuning per bit width, warm-started from the
/// unquantized models of `base`, plus post-hoc quantization of the
/// unquantized learned model. Unquantized reference rows come first.
std::vector<BitsRow> sweep_bits(const ExperimentSetup& setup, const AblationRun& base, std::span<const int> bits);

/// Per-user feedback overhead and estimator cost.
struct OverheadReport {
  int num_subcarriers = 0;
  int power_bits = 0;
  int index_bits = 0;
  int bits_per_user = 0;
  std::size_t flops = 0;
  double reference_flops = 35330.0;
  double flops_ratio = 0.0;  // flops / reference_flops
};
OverheadReport overhead_report(const SystemConfig& cfg, int power_bits);

// ---- CSV outputs --------------------------------------------------------------

void write_distance_csv(const std::string& path, const std::vector<DistanceRow>& rows, const ExperimentSetup& setup);
void write_bits_csv(const std::string& path, const std::vector<BitsRow>& rows, const ExperimentSetup& setup);
void write_ablation_csv(const std::string& path, const AblationRun& run);
void write_train_log_csv(const std::string& path, const TrainResult& result, const SystemConfig& cfg,
                         std::uint64_t seed);
/// Max-over-subcarrier received power on an angle x range grid.
void write_beam_pattern_csv(const std::string& path, const PtaParams& beam, std::span<const double> angles_rad,
                            std::span<const double> ranges_m, const SystemConfig& cfg, const DerivedGrids& grids,
                            std::uint64_t seed);
void write_index_curve_csv(const std::string& path, const std::vector<IndexDistancePoint>& curve, double angle_rad,
                           const SystemConfig& cfg);
void write_overhead_csv(const std::string& path, const OverheadReport& report, const SystemConfig& cfg);

/// Evenly spaced grid including both ends; a single point when count is 1.
std::vector<double> linspace(double lo, double hi, std::size_t count);

}  // namespace ptaloc
