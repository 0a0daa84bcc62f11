#include "ptaloc/experiments.hpp"

#include <cmath>
#include <numbers>

#include "ptaloc/csv.hpp"
#include "ptaloc/error.hpp"

namespace ptaloc {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

CsvWriter::Meta meta_for(const SystemConfig& cfg, std::uint64_t seed, const char* kind) {
  return {{"kind", kind}, {"config_hash", hash_hex(config_hash(cfg))}, {"seed", std::to_string(seed)}};
}

std::vector<CsvCell> score_cells(const MethodScore& s) {
  return {s.method,
          s.val.rmse_2d_m,
          s.test.rmse_2d_m,
          s.test.angle_rmse_rad * kDeg,
          s.test.range_rmse_m};
}

const std::vector<std::string> kScoreColumns = {"method", "val_rmse_2d_m", "test_rmse_2d_m", "test_angle_rmse_deg",
                                                "test_range_rmse_m"};

TrainOptions run_options(const ExperimentSetup& setup, bool train_beam, std::optional<int> bits) {
  TrainOptions o = setup.train;
  o.seed = setup.seed;
  o.train_beam = train_beam;
  o.bits = bits;
  return o;
}

MethodScore score_model(const std::string& method, const SpotModel& model, const DatasetSplits& data,
                        const ExperimentSetup& setup, const SystemConfig& cfg, const DerivedGrids& grids) {
  const bool noisy = setup.train.noisy;
  const auto vs = noisy ? std::optional<std::uint64_t>(val_noise_seed(setup)) : std::nullopt;
  const auto ts = noisy ? std::optional<std::uint64_t>(test_noise_seed(setup)) : std::nullopt;
  return {method, evaluate(model, data.val, cfg, grids, vs), evaluate(model, data.test, cfg, grids, ts)};
}

}  // namespace

const MethodScore& AblationRun::score(const std::string& method) const {
  for (const auto& s : scores) {
    if (s.method == method) return s;
  }
  throw Error("no score for method '" + method + "'");
}

std::uint64_t val_noise_seed(const ExperimentSetup& setup) {
  TrainOptions o;
  o.seed = setup.seed;
  return validation_noise_seed(o);
}

std::uint64_t test_noise_seed(const ExperimentSetup& setup) { return derive_seed(setup.seed, 0x7e57); }

LossReport evaluate_lookup(const PtaParams& beam, const LookupTable& table, const Dataset& data,
                           const SystemConfig& cfg, const DerivedGrids& grids, std::optional<std::uint64_t> noise_seed,
                           std::optional<int> bits, const PowerRange& range) {
  std::vector<std::uint64_t> seeds;
  if (noise_seed) seeds = sample_noise_seeds(*noise_seed, data.size());
  const auto msgs = measure_users(beam, data.users, seeds, cfg, grids, bits, range);
  std::vector<PositionEstimate> est;
  est.reserve(msgs.size());
  for (const auto& m : msgs) est.push_back(lookup_estimate(m, table));
  return loss_rmse(est, data.users);
}

AblationRun run_ablation(const ExperimentSetup& setup) {
  validate(setup.cfg);
  const auto grids = derive_grids(setup.cfg);
  AblationRun run;
  run.cfg = setup.cfg;
  run.seed = setup.seed;
  run.data = make_splits(setup.cfg, setup.n_train, setup.n_val, setup.n_test, setup.seed);
  run.cbs = default_cbs_design(setup.cfg, grids);

  const std::uint64_t init_seed = derive_seed(setup.seed, 0x1417);
  const SpotModel fixed_start = init_model(run.cbs.params, run.data.train, setup.cfg, grids, init_seed);
  const SpotModel spot_start =
      setup.spot_init == BeamInit::cbs
          ? fixed_start
          : init_model(init_ramp_params(setup.cfg, derive_seed(setup.seed, 0x7a4)), run.data.train, setup.cfg, grids,
                       init_seed);

  run.spot = train(spot_start, run.data.train, run.data.val, setup.cfg, grids, run_options(setup, true, std::nullopt));
  run.fixed =
      train(fixed_start, run.data.train, run.data.val, setup.cfg, grids, run_options(setup, false, std::nullopt));

  LookupOptions lo;
  lo.power = fixed_start.quantizer;
  run.lookup = build_lookup_table(run.cbs.params, setup.cfg, grids, lo);

  run.scores.push_back(score_model(kMethodSpot, run.spot.best, run.data, setup, setup.cfg, grids));
  run.scores.push_back(score_model(kMethodFixed, run.fixed.best, run.data, setup, setup.cfg, grids));
  const bool noisy = setup.train.noisy;
  MethodScore lookup{kMethodLookup, {}, {}};
  lookup.val = evaluate_lookup(run.cbs.params, run.lookup, run.data.val, setup.cfg, grids,
                               noisy ? std::optional<std::uint64_t>(val_noise_seed(setup)) : std::nullopt,
                               std::nullopt, lo.power);
  lookup.test = evaluate_lookup(run.cbs.params, run.lookup, run.data.test, setup.cfg, grids,
                                noisy ? std::optional<std::uint64_t>(test_noise_seed(setup)) : std::nullopt,
                                std::nullopt, lo.power);
  run.scores.push_back(std::move(lookup));
  return run;
}

std::vector<DistanceRow> sweep_distance(const ExperimentSetup& setup, std::span<const double> max_distances_m) {
  if (max_distances_m.empty()) throw Error("sweep_distance: empty distance grid");
  for (double d : max_distances_m) {
    if (!(d > setup.cfg.range_min_m)) throw Error("sweep_distance: every maximum distance must exceed range_min");
  }
  std::vector<DistanceRow> rows;
  for (double d : max_distances_m) {
    ExperimentSetup point = setup;
    point.cfg.range_max_m = d;
    const auto run = run_ablation(point);
    for (const auto& s : run.scores) rows.push_back({d, s});
  }
  return rows;
}

std::vector<BitsRow> sweep_bits(const ExperimentSetup& setup, const AblationRun& base, std::span<const int> bits) {
  if (bits.empty()) throw Error("sweep_bits: empty bit list");
  for (int b : bits) {
    if (b < 1 || b > 16) throw Error("sweep_bits: bit widths must be in 1..16");
  }
  if (config_hash(base.cfg) != config_hash(setup.cfg) || base.seed != setup.seed) {
    throw Error("sweep_bits: base run was produced under another config or seed");
  }
  const auto grids = derive_grids(setup.cfg);
  std::vector<BitsRow> rows;
  rows.push_back({std::nullopt, score_model(kMethodSpot, base.spot.best, base.data, setup, setup.cfg, grids)});
  rows.push_back({std::nullopt, score_model(kMethodFixed, base.fixed.best, base.data, setup, setup.cfg, grids)});

  for (int b : bits) {
    TrainOptions spot_opts = run_options(setup, true, b);
    spot_opts.max_epochs = setup.qat_epochs;
    const auto spot_q = train(base.spot.best, base.data.train, base.data.val, setup.cfg, grids, spot_opts);
    rows.push_back({b, score_model(kMethodSpotQ, spot_q.best, base.data, setup, setup.cfg, grids)});

    TrainOptions fixed_opts = run_options(setup, false, b);
    fixed_opts.max_epochs = setup.qat_epochs;
    const auto fixed_q = train(base.fixed.best, base.data.train, base.data.val, setup.cfg, grids, fixed_opts);
    rows.push_back({b, score_model(kMethodFixedQ, fixed_q.best, base.data, setup, setup.cfg, grids)});

    SpotModel post = base.spot.best;
    post.bits = b;
    rows.push_back({b, score_model(kMethodSpotPostHoc, post, base.data, setup, setup.cfg, grids)});
  }
  return rows;
}

OverheadReport overhead_report(const SystemConfig& cfg, int power_bits) {
  if (power_bits < 1) throw Error("overhead_report: power bits must be at least 1");
  OverheadReport r;
  r.num_subcarriers = cfg.num_subcarriers;
  r.power_bits = power_bits;
  r.index_bits = static_cast<int>(std::ceil(std::log2(static_cast<double>(cfg.num_subcarriers))));
  r.bits_per_user = r.index_bits + r.power_bits;
  const auto dims = default_mlp_dims();
  r.flops = flops_count(dims);
  r.flops_ratio = static_cast<double>(r.flops) / r.reference_flops;
  return r;
}

void write_distance_csv(const std::string& path, const std::vector<DistanceRow>& rows, const ExperimentSetup& setup) {
  CsvWriter csv(path, meta_for(setup.cfg, setup.seed, "sweep-distance"));
  std::vector<std::string> cols = {"max_distance_m"};
  cols.insert(cols.end(), kScoreColumns.begin(), kScoreColumns.end());
  csv.header(cols);
  for (const auto& r : rows) {
    std::vector<CsvCell> cells = {r.max_distance_m};
    const auto rest = score_cells(r.score);
    cells.insert(cells.end(), rest.begin(), rest.end());
    csv.row(cells);
  }
}

void write_bits_csv(const std::string& path, const std::vector<BitsRow>& rows, const ExperimentSetup& setup) {
  CsvWriter csv(path, meta_for(setup.cfg, setup.seed, "sweep-bits"));
  std::vector<std::string> cols = {"bits"};
  cols.insert(cols.end(), kScoreColumns.begin(), kScoreColumns.end());
  csv.header(cols);
  for (const auto& r : rows) {
    std::vector<CsvCell> cells = {r.bits ? CsvCell(*r.bits) : CsvCell("none")};
    const auto rest = score_cells(r.score);
    cells.insert(cells.end(), rest.begin(), rest.end());
    csv.row(cells);
  }
}

void write_ablation_csv(const std::string& path, const AblationRun& run) {
  CsvWriter csv(path, meta_for(run.cfg, run.seed, "ablation"));
  std::vector<std::string> cols = kScoreColumns;
  cols.push_back("best_epoch");
  csv.header(cols);
  for (const auto& s : run.scores) {
    auto cells = score_cells(s);
    int epoch = -1;
    if (s.method == kMethodSpot) epoch = run.spot.best_epoch;
    if (s.method == kMethodFixed) epoch = run.fixed.best_epoch;
    cells.emplace_back(epoch);
    csv.row(cells);
  }
}

void write_train_log_csv(const std::string& path, const TrainResult& result, const SystemConfig& cfg,
                         std::uint64_t seed) {
  CsvWriter csv(path, meta_for(cfg, seed, "train-log"));
  csv.header({"epoch", "train_rmse", "val_rmse", "lr"});
  csv.row({0, "", result.initial_val_rmse, ""});
  for (const auto& e : result.log) csv.row({e.epoch, e.train_rmse, e.val_rmse, e.lr});
}

void write_beam_pattern_csv(const std::string& path, const PtaParams& beam, std::span<const double> angles_rad,
                            std::span<const double> ranges_m, const SystemConfig& cfg, const DerivedGrids& grids,
                            std::uint64_t seed) {
  const auto map = beam_pattern_map(project_params(beam, cfg), angles_rad, ranges_m, cfg, grids);
  CsvWriter csv(path, meta_for(cfg, seed, "beam-pattern"));
  csv.header({"angle_deg", "range_m", "max_power_dbm"});
  for (std::size_t i = 0; i < map.angles_rad.size(); ++i) {
    for (std::size_t j = 0; j < map.ranges_m.size(); ++j) {
      csv.row({map.angles_rad[i] * kDeg, map.ranges_m[j], map.at(i, j)});
    }
  }
}

void write_index_curve_csv(const std::string& path, const std::vector<IndexDistancePoint>& curve, double angle_rad,
                           const SystemConfig& cfg) {
  auto meta = meta_for(cfg, 0, "index-curve");
  meta.emplace_back("angle_deg", CsvCell(angle_rad * kDeg).text());
  CsvWriter csv(path, meta);
  csv.header({"range_m", "subcarrier_index"});
  for (const auto& p : curve) csv.row({p.range_m, p.index});
}

void write_overhead_csv(const std::string& path, const OverheadReport& r, const SystemConfig& cfg) {
  CsvWriter csv(path, meta_for(cfg, 0, "overhead"));
  csv.header({"quantity", "value"});
  csv.row({"num_subcarriers", r.num_subcarriers});
  csv.row({"index_bits", r.index_bits});
  csv.row({"power_bits", r.power_bits});
  csv.row({"bits_per_user", r.bits_per_user});
  csv.row({"estimator_flops", static_cast<unsigned long long>(r.flops)});
  csv.row({"reference_flops", r.reference_flops});
  csv.row({"flops_ratio", r.flops_ratio});
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (count == 0) throw Error("linspace: count must be at least 1");
  if (count == 1) return {lo};
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  v.back() = hi;
  return v;
}

}  // namespace ptaloc
