// Command-line driver: dataset generation, training, evaluation and the
// experiment sweeps. Every output lands under --out as CSV, JSON or binary.
//
// Exit codes: 0 success, 1 runtime failure, 2 bad usage, 3 config hash
// mismatch, 4 malformed input file.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ptaloc/cbs.hpp"
#include "ptaloc/checkpoint.hpp"
#include "ptaloc/csv.hpp"
#include "ptaloc/dataset.hpp"
#include "ptaloc/error.hpp"
#include "ptaloc/experiments.hpp"
#include "ptaloc/trainer.hpp"

namespace fs = std::filesystem;
using namespace ptaloc;

namespace {

constexpr double kRad = std::numbers::pi / 180.0;

struct Common {
  bool desk = false;
  bool full = false;
  std::string config_file;
  std::uint64_t seed = 1;
  std::string out = "out";
  bool quiet = false;
};

struct TrainFlags {
  int epochs = 300;
  int patience = 30;
  std::size_t batch = 256;
  double lr = 1e-3;
  double beam_lr_scale = 1.0;
  std::string init = "cbs";
  std::string feedback = "st";
  bool noiseless = false;
  int qat_epochs = 60;
};

struct Sizes {
  std::size_t train = 0, val = 0, test = 0;
};

SystemConfig resolve_config(const Common& c) {
  if (c.desk && c.full) throw CLI::ValidationError("--desk and --full-scale are mutually exclusive");
  SystemConfig cfg = c.full ? full_scale_config() : desk_scale_config();
  if (!c.config_file.empty()) cfg = load_config_file(c.config_file);
  validate(cfg);
  return cfg;
}

Sizes resolve_sizes(const Common& c, const Sizes& given) {
  Sizes s = c.full ? Sizes{50000, 5000, 5000} : Sizes{10000, 1000, 1000};
  if (given.train) s.train = given.train;
  if (given.val) s.val = given.val;
  if (given.test) s.test = given.test;
  return s;
}

std::string out_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out);
  return (fs::path(c.out) / name).string();
}

TrainOptions train_options(const Common& c, const TrainFlags& t) {
  TrainOptions o;
  o.max_epochs = t.epochs;
  o.early_stop_patience = t.patience;
  o.batch_size = t.batch;
  o.adam.lr = t.lr;
  o.beam_lr_scale = t.beam_lr_scale;
  o.noisy = !t.noiseless;
  if (t.feedback == "soft") {
    o.feedback_path = FeedbackPath::soft;
  } else if (t.feedback == "st") {
    o.feedback_path = FeedbackPath::straight_through;
  } else {
    throw CLI::ValidationError("--feedback must be st or soft");
  }
  o.seed = c.seed;
  if (!c.quiet) {
    o.on_epoch = [](const EpochLog& e) {
      std::fprintf(stderr, "epoch %3d  train %.4f  val %.4f  lr %.3g\n", e.epoch, e.train_rmse, e.val_rmse, e.lr);
    };
  }
  return o;
}

BeamInit parse_init(const std::string& s) {
  if (s == "cbs") return BeamInit::cbs;
  if (s == "ramp") return BeamInit::ramp;
  throw CLI::ValidationError("--init must be cbs or ramp");
}

ExperimentSetup make_setup(const Common& c, const TrainFlags& t, const Sizes& given) {
  ExperimentSetup s;
  s.cfg = resolve_config(c);
  const Sizes n = resolve_sizes(c, given);
  s.n_train = n.train;
  s.n_val = n.val;
  s.n_test = n.test;
  s.seed = c.seed;
  s.train = train_options(c, t);
  s.spot_init = parse_init(t.init);
  s.qat_epochs = t.qat_epochs;
  return s;
}

void add_common(CLI::App* app, Common& c) {
  app->add_flag("--desk", c.desk, "Desk scale: N=64, M=256, users within 5..50 m (default)");
  app->add_flag("--full-scale,--paper", c.full, "Full scale: N=256, M=1584, users within 5..300 m");
  app->add_option("--config", c.config_file, "key=value config file; replaces the scale preset")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Base seed for data, initialisation and noise");
  app->add_option("--out", c.out, "Output directory");
  app->add_flag("--quiet", c.quiet, "No per-epoch progress on stderr");
}

void add_train_flags(CLI::App* app, TrainFlags& t) {
  app->add_option("--epochs", t.epochs, "Maximum epochs")->check(CLI::NonNegativeNumber);
  app->add_option("--patience", t.patience, "Early-stop patience in epochs")->check(CLI::PositiveNumber);
  app->add_option("--batch", t.batch, "Mini-batch size")->check(CLI::PositiveNumber);
  app->add_option("--lr", t.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  app->add_option("--beam-lr-scale", t.beam_lr_scale, "Learning-rate multiplier for the beam")
      ->check(CLI::PositiveNumber);
  app->add_option("--init", t.init, "Starting beam for the learned run: cbs or ramp");
  app->add_option("--feedback", t.feedback,
                  "Estimator input during training: st (deployed index and power, soft gradients) or soft");
  app->add_flag("--noiseless", t.noiseless, "Train and score without receiver noise");
}

void add_sizes(CLI::App* app, Sizes& s) {
  app->add_option("--n-train", s.train, "Training samples");
  app->add_option("--n-val", s.val, "Validation samples");
  app->add_option("--n-test", s.test, "Test samples");
}

void print_scores(const std::vector<MethodScore>& scores) {
  for (const auto& s : scores) {
    std::printf("%-16s val %.4f m  test %.4f m\n", s.method.c_str(), s.val.rmse_2d_m, s.test.rmse_2d_m);
  }
}

Anchor parse_anchor(const std::vector<double>& v, const char* flag) {
  if (v.size() != 2) throw CLI::ValidationError(std::string(flag) + " takes ANGLE_DEG RANGE_M");
  return {v[0] * kRad, v[1]};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-field rainbow-beam localization: simulate, train, evaluate"};
  app.require_subcommand(1);

  Common common;
  TrainFlags tflags;
  Sizes sizes;

  auto* gen = app.add_subcommand("gen-data", "Sample train/val/test user positions");
  add_common(gen, common);
  add_sizes(gen, sizes);

  auto* trn = app.add_subcommand("train", "Train a model and write checkpoint.json and train_log.csv");
  add_common(trn, common);
  add_train_flags(trn, tflags);
  std::string data_dir;
  bool fixed_beam = false;
  int train_bits = 0;
  trn->add_option("--data", data_dir, "Directory from gen-data; generated on the fly when omitted");
  add_sizes(trn, sizes);
  trn->add_flag("--fixed-beam", fixed_beam, "Keep the analytic beam and train only the estimator");
  trn->add_option("--bits", train_bits, "Quantization-aware training at this power bit width")
      ->check(CLI::Range(1, 16));

  auto* evl = app.add_subcommand("eval", "Score a checkpoint on a dataset file");
  add_common(evl, common);
  std::string ckpt_path, data_file;
  int eval_bits = -1;
  evl->add_option("--checkpoint", ckpt_path, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  evl->add_option("--data", data_file, "Dataset file")->required()->check(CLI::ExistingFile);
  evl->add_option("--bits", eval_bits, "Override the power bit width (0 = unquantized)")->check(CLI::Range(0, 16));
  bool eval_noiseless = false;
  evl->add_flag("--noiseless", eval_noiseless, "Score without receiver noise");

  auto* pat = app.add_subcommand("beam-pattern", "Max-over-subcarrier power on an angle x range grid");
  add_common(pat, common);
  std::string pat_ckpt;
  std::vector<double> start_anchor, end_anchor;
  std::size_t n_angles = 121, n_ranges = 100;
  double pat_rmax = 0.0;
  pat->add_option("--checkpoint", pat_ckpt, "Checkpoint JSON; the analytic design is used when omitted")
      ->check(CLI::ExistingFile);
  pat->add_option("--start", start_anchor, "Analytic design start anchor: ANGLE_DEG RANGE_M")->expected(2);
  pat->add_option("--end", end_anchor, "Analytic design end anchor: ANGLE_DEG RANGE_M")->expected(2);
  pat->add_option("--angles", n_angles, "Angle grid points")->check(CLI::PositiveNumber);
  pat->add_option("--ranges", n_ranges, "Range grid points")->check(CLI::PositiveNumber);
  pat->add_option("--max-range", pat_rmax, "Largest grid range (default: service maximum)");

  auto* swd = app.add_subcommand("sweep-distance", "Ablation across maximum service distances");
  add_common(swd, common);
  add_train_flags(swd, tflags);
  add_sizes(swd, sizes);
  std::vector<double> distances;
  swd->add_option("--distances", distances, "Maximum distances in metres (default depends on scale)");

  auto* swb = app.add_subcommand("sweep-bits", "Quantization-aware training per power bit width");
  add_common(swb, common);
  add_train_flags(swb, tflags);
  add_sizes(swb, sizes);
  std::vector<int> bit_list = {1, 2, 3, 4, 5, 6, 7, 8};
  swb->add_option("--bits", bit_list, "Bit widths")->check(CLI::Range(1, 16));
  swb->add_option("--qat-epochs", tflags.qat_epochs, "Epoch budget per bit width")->check(CLI::PositiveNumber);

  auto* idx = app.add_subcommand("index-curve", "Peak subcarrier index vs distance along one direction");
  add_common(idx, common);
  double curve_angle = 0.0, curve_r0 = 0.0, curve_r1 = 0.0, curve_step = 1.0;
  idx->add_option("--angle", curve_angle, "Direction in degrees");
  idx->add_option("--from", curve_r0, "Design start range (default: service minimum)");
  idx->add_option("--to", curve_r1, "Design end range (default: service maximum)");
  idx->add_option("--step", curve_step, "Range step of the curve in metres")->check(CLI::PositiveNumber);

  auto* ovh = app.add_subcommand("overhead", "Feedback bits and estimator FLOPs per user");
  add_common(ovh, common);
  int ovh_bits = 8;
  ovh->add_option("--bits", ovh_bits, "Power bit width")->check(CLI::Range(1, 16));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const SystemConfig cfg = resolve_config(common);
    const DerivedGrids grids = derive_grids(cfg);

    if (*gen) {
      const Sizes n = resolve_sizes(common, sizes);
      const auto splits = make_splits(cfg, n.train, n.val, n.test, common.seed);
      for (const Dataset* d : {&splits.train, &splits.val, &splits.test}) {
        const std::string name = to_string(d->split);
        save_dataset(*d, out_path(common, name + ".bin"));
        export_dataset_csv(*d, out_path(common, name + ".csv"));
      }
      std::printf("wrote %zu/%zu/%zu users to %s (config %s)\n", n.train, n.val, n.test, common.out.c_str(),
                  hash_hex(config_hash(cfg)).c_str());
    } else if (*trn) {
      DatasetSplits splits;
      if (!data_dir.empty()) {
        splits.train = load_dataset((fs::path(data_dir) / "train.bin").string(), cfg);
        splits.val = load_dataset((fs::path(data_dir) / "val.bin").string(), cfg);
        splits.test = load_dataset((fs::path(data_dir) / "test.bin").string(), cfg);
      } else {
        const Sizes n = resolve_sizes(common, sizes);
        splits = make_splits(cfg, n.train, n.val, n.test, common.seed);
      }
      const auto cbs = default_cbs_design(cfg, grids);
      const std::uint64_t init_seed = derive_seed(common.seed, 0x1417);
      PtaParams beam = cbs.params;
      if (!fixed_beam && parse_init(tflags.init) == BeamInit::ramp) {
        beam = init_ramp_params(cfg, derive_seed(common.seed, 0x7a4));
      }
      const SpotModel start = init_model(beam, splits.train, cfg, grids, init_seed);
      TrainOptions opts = train_options(common, tflags);
      opts.train_beam = !fixed_beam;
      if (train_bits > 0) opts.bits = train_bits;
      const auto result = train(start, splits.train, splits.val, cfg, grids, opts);
      const auto ckpt = make_checkpoint(result, cfg, common.seed);
      save_checkpoint(ckpt, out_path(common, "checkpoint.json"));
      write_train_log_csv(out_path(common, "train_log.csv"), result, cfg, common.seed);
      std::printf("best validation RMSE %.4f m at epoch %d (start %.4f m)\n", result.best_val_rmse,
                  result.best_epoch, result.initial_val_rmse);
    } else if (*evl) {
      const auto ckpt = load_checkpoint(ckpt_path, cfg);
      const auto data = load_dataset(data_file, cfg);
      const auto noise = eval_noiseless ? std::nullopt : std::optional<std::uint64_t>(derive_seed(common.seed, 0x7e57));
      std::optional<int> bits;
      if (eval_bits >= 0) bits = eval_bits;
      LossReport r;
      std::string method;
      if (ckpt.has_estimator) {
        r = evaluate_checkpoint(ckpt, data, cfg, grids, noise, bits);
        method = kMethodSpot;
      } else {
        const auto q = calibrate_power_range(ckpt.model.beam, data.users, cfg, grids, derive_seed(common.seed, 0xca1));
        LookupOptions lo;
        lo.power = q;
        const auto table = build_lookup_table(ckpt.model.beam, cfg, grids, lo);
        std::optional<int> lb = bits && *bits > 0 ? bits : std::nullopt;
        r = evaluate_lookup(ckpt.model.beam, table, data, cfg, grids, noise, lb, q);
        method = kMethodLookup;
      }
      CsvWriter csv(out_path(common, "eval.csv"), {{"kind", "eval"},
                                                    {"config_hash", hash_hex(config_hash(cfg))},
                                                    {"seed", std::to_string(common.seed)},
                                                    {"dataset_seed", std::to_string(data.seed)},
                                                    {"split", to_string(data.split)}});
      csv.header({"method", "rmse_2d_m", "angle_rmse_deg", "range_rmse_m", "samples"});
      csv.row({method, r.rmse_2d_m, r.angle_rmse_rad / kRad, r.range_rmse_m, data.size()});
      std::printf("%s: 2D RMSE %.4f m, angle %.4f deg, range %.4f m\n", method.c_str(), r.rmse_2d_m,
                  r.angle_rmse_rad / kRad, r.range_rmse_m);
    } else if (*pat) {
      PtaParams beam;
      if (!pat_ckpt.empty()) {
        beam = load_checkpoint(pat_ckpt, cfg).model.beam;
      } else if (!start_anchor.empty() || !end_anchor.empty()) {
        const auto d = default_cbs_design(cfg, grids);
        const Anchor s = start_anchor.empty() ? d.start : parse_anchor(start_anchor, "--start");
        const Anchor e = end_anchor.empty() ? d.end : parse_anchor(end_anchor, "--end");
        const auto d2 = cbs_design(s, e, cfg, grids);
        save_checkpoint(make_checkpoint(d2, cfg), out_path(common, "design.json"));
        beam = d2.params;
      } else {
        const auto d = default_cbs_design(cfg, grids);
        save_checkpoint(make_checkpoint(d, cfg), out_path(common, "design.json"));
        beam = d.params;
      }
      const double rmax = pat_rmax > 0.0 ? pat_rmax : cfg.range_max_m;
      const auto angles = linspace(-cfg.angle_bound_rad, cfg.angle_bound_rad, n_angles);
      const auto ranges = linspace(cfg.range_min_m, rmax, n_ranges);
      write_beam_pattern_csv(out_path(common, "beam_pattern.csv"), beam, angles, ranges, cfg, grids, common.seed);
      std::printf("wrote %zu x %zu grid\n", angles.size(), ranges.size());
    } else if (*swd) {
      auto setup = make_setup(common, tflags, sizes);
      if (distances.empty()) {
        distances = common.full ? std::vector<double>{50, 100, 150, 200, 250, 300} : std::vector<double>{20, 35, 50};
      }
      const auto rows = sweep_distance(setup, distances);
      write_distance_csv(out_path(common, "sweep_distance.csv"), rows, setup);
      for (const auto& r : rows) {
        std::printf("%6.1f m  %-16s test %.4f m\n", r.max_distance_m, r.score.method.c_str(), r.score.test.rmse_2d_m);
      }
    } else if (*swb) {
      auto setup = make_setup(common, tflags, sizes);
      const auto base = run_ablation(setup);
      write_ablation_csv(out_path(common, "ablation.csv"), base);
      print_scores(base.scores);
      const auto rows = sweep_bits(setup, base, bit_list);
      write_bits_csv(out_path(common, "sweep_bits.csv"), rows, setup);
      for (const auto& r : rows) {
        std::printf("%4s  %-16s test %.4f m\n", r.bits ? std::to_string(*r.bits).c_str() : "none",
                    r.score.method.c_str(), r.score.test.rmse_2d_m);
      }
    } else if (*idx) {
      const double r0 = curve_r0 > 0.0 ? curve_r0 : cfg.range_min_m;
      const double r1 = curve_r1 > 0.0 ? curve_r1 : cfg.range_max_m;
      const Anchor s{curve_angle * kRad, r0}, e{curve_angle * kRad, r1};
      const auto design = cbs_design(s, e, cfg, grids);
      std::vector<double> ranges;
      for (int i = 0; r0 + i * curve_step <= r1 + 1e-9; ++i) ranges.push_back(r0 + i * curve_step);
      const auto curve = index_distance_curve(design.params, s.angle_rad, ranges, cfg, grids);
      write_index_curve_csv(out_path(common, "index_curve.csv"), curve, s.angle_rad, cfg);
      std::printf("wrote %zu points\n", curve.size());
    } else if (*ovh) {
      const auto r = overhead_report(cfg, ovh_bits);
      write_overhead_csv(out_path(common, "overhead.csv"), r, cfg);
      std::printf("%d bits per user (%d index + %d power), estimator %zu FLOPs (%.1f%% of %.0f)\n", r.bits_per_user,
                  r.index_bits, r.power_bits, r.flops, 100.0 * r.flops_ratio, r.reference_flops);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const HashMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
