// Acceptance run: one PASS/FAIL line per criterion, thresholds fixed below.
// Criteria are selected with --criteria so CI can split the fast checks from
// the training runs. Exit status is non-zero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ptaloc/cbs.hpp"
#include "ptaloc/experiments.hpp"
#include "ptaloc/geometry.hpp"
#include "support.hpp"

using namespace ptaloc;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---- 1: gradient fidelity ------------------------------------------------------

Outcome gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  auto prob = testing::toy_problem(20, 5);
  auto params = testing::toy_params(prob.cfg, 3);
  std::vector<double> grad;
  prob.loss(params, &grad);
  const auto slots = params.slots();
  const auto r = testing::check_gradients([&] { return prob.loss(params, nullptr); }, slots, grad, 1e-5);
  const double secs = seconds_since(t0);
  return {r.max_rel < 1e-4 && secs < 10.0,
          fmt("max relative error %.3g over %zu parameters (limit 1e-4), %.1f s (limit 10 s)", r.max_rel, r.count,
              secs)};
}

// ---- 2: geometry ---------------------------------------------------------------

Outcome geometry_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = full_scale_config();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ang(-cfg.angle_bound_rad, cfg.angle_bound_rad);
  std::uniform_real_distribution<double> rng_r(cfg.range_min_m, cfg.range_max_m);
  double worst = 0.0;
  for (int s = 0; s < 10000; ++s) {
    const auto u = UserPosition::from_polar(ang(rng), rng_r(rng));
    // Both array ends, where the approximation is worst, plus one interior element.
    for (int n : {0, cfg.num_antennas - 1, s % cfg.num_antennas}) {
      const double exact = testing::exact_element_distance(u, n, cfg);
      worst = std::max(worst, std::abs(element_distance_approx(u, n, cfg) - exact));
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 5e-3 && secs < 5.0,
          fmt("max |approximate - exact| = %.3g m over 1e4 users (limit 5e-3 m), %.2f s", worst, secs)};
}

// ---- 3: Rayleigh distance ------------------------------------------------------

Outcome rayleigh() {
  const auto cfg = full_scale_config();
  // Independent of the library: aperture D = (N - 1) d, distance 2 D^2 / lambda.
  const double lambda = 3e8 / cfg.carrier_freq_hz;
  const double aperture = (cfg.num_antennas - 1) * lambda / 2.0;
  const double oracle = 2.0 * aperture * aperture / lambda;
  const double got = rayleigh_distance(cfg);
  return {std::abs(got - 348.35) <= 0.01 && std::abs(got - oracle) < 1e-9,
          fmt("%.4f m (target 348.35 +/- 0.01, direct formula %.4f)", got, oracle)};
}

// ---- 4: beam invariances -------------------------------------------------------

Outcome invariances() {
  const auto cfg = full_scale_config();
  const auto g = derive_grids(cfg);
  const double t_max = cfg.max_delay_s();
  auto on_grid = [](double t) { return std::ldexp(std::round(std::ldexp(t, 44)), -44); };
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi), unit(0.0, 1.0);

  PtaParams base;
  for (int n = 0; n < cfg.num_antennas; ++n) {
    base.theta_phi.push_back(phase(rng));
    base.theta_t.push_back(on_grid(0.5 * t_max * unit(rng)));
  }
  double worst_modulus = 0.0;
  for (auto w : beam_weight_matrix(project_params(base, cfg), g)) {
    worst_modulus = std::max(worst_modulus, std::abs(std::abs(w) - 1.0));
  }

  double worst_power = 0.0;
  for (const auto& u : {UserPosition::from_polar(0.3, 40.0), UserPosition::from_polar(-0.9, 250.0)}) {
    const auto h = channel_matrix(u, cfg, g);
    auto powers = [&](const PtaParams& p) {
      std::vector<double> out;
      for (auto y : received_signal(h, project_params(p, cfg), g, cfg, std::nullopt)) out.push_back(std::norm(y));
      return out;
    };
    const auto p0 = powers(base);
    for (double tau : {3e-8, 0.2 * t_max, 0.45 * t_max}) {
      auto shifted = base;
      for (auto& t : shifted.theta_t) t += on_grid(tau);
      for (auto& ph : shifted.theta_phi) ph += 2.3;
      const auto p1 = powers(shifted);
      for (std::size_t m = 0; m < p0.size(); ++m) worst_power = std::max(worst_power, std::abs(p1[m] - p0[m]) / p0[m]);
    }
  }
  return {worst_power <= 1e-10 && worst_modulus <= 1e-12,
          fmt("max relative power change %.3g (limit 1e-10), max ||w| - 1| %.3g (limit 1e-12)", worst_power,
              worst_modulus)};
}

// ---- 5, 6, 7: training comparisons ---------------------------------------------

struct TrainingOutcomes {
  Outcome ablation_a;
  Outcome ablation_b;
  Outcome bits;
};

TrainingOutcomes training_criteria(const fs::path& out, int seeds, bool want_bits, bool verbose) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> spot_ratio, lookup_ratio;
  std::string per_seed;
  std::optional<AblationRun> first;
  ExperimentSetup first_setup;
  for (int s = 1; s <= seeds; ++s) {
    ExperimentSetup setup;
    setup.cfg = desk_scale_config();
    setup.seed = static_cast<std::uint64_t>(s);
    if (verbose) {
      setup.train.on_epoch = [s](const EpochLog& e) {
        if (e.epoch % 25 == 0) std::fprintf(stderr, "seed %d epoch %d val %.4f\n", s, e.epoch, e.val_rmse);
      };
    }
    auto run = run_ablation(setup);
    write_ablation_csv((out / fmt("ablation_seed%d.csv", s)).string(), run);
    const auto& spot = run.score(kMethodSpot);
    const auto& fixed = run.score(kMethodFixed);
    const auto& lookup = run.score(kMethodLookup);
    spot_ratio.push_back(spot.val.rmse_2d_m / fixed.val.rmse_2d_m);
    lookup_ratio.push_back(lookup.test.rmse_2d_m / fixed.test.rmse_2d_m);
    per_seed += fmt(" [seed %d: spot %.4f, fixed %.4f, lookup %.4f]", s, spot.val.rmse_2d_m, fixed.val.rmse_2d_m,
                    lookup.test.rmse_2d_m);
    std::fprintf(stderr, "seed %d done after %.0f s:%s\n", s, seconds_since(t0), per_seed.c_str());
    if (s == 1) {
      first = std::move(run);
      first_setup = setup;
    }
  }
  const double secs = seconds_since(t0);
  TrainingOutcomes r;
  const double a = median(spot_ratio);
  r.ablation_a = {a <= 0.85 && secs < 7200.0,
                  fmt("median SPOT/fixed validation RMSE ratio %.4f (limit 0.85), %.0f s for %d seeds (limit 7200 s);",
                      a, secs, seeds) +
                      per_seed};
  const double b = median(lookup_ratio);
  r.ablation_b = {b >= 1.10, fmt("median lookup/trained test RMSE ratio %.4f (limit >= 1.10)", b)};

  if (want_bits && first) {
    const std::vector<int> bits = {1, 2, 3, 4, 5, 6, 7, 8};
    const auto rows = sweep_bits(first_setup, *first, bits);
    write_bits_csv((out / "sweep_bits.csv").string(), rows, first_setup);
    std::map<int, double> spot_q, fixed_q;
    double spot_unq = 0.0;
    for (const auto& row : rows) {
      if (!row.bits && row.score.method == kMethodSpot) spot_unq = row.score.test.rmse_2d_m;
      if (row.bits && row.score.method == kMethodSpotQ) spot_q[*row.bits] = row.score.test.rmse_2d_m;
      if (row.bits && row.score.method == kMethodFixedQ) fixed_q[*row.bits] = row.score.test.rmse_2d_m;
    }
    bool monotone = true;
    std::string curve;
    for (int bw : bits) {
      curve += fmt(" %d:%.4f", bw, spot_q[bw]);
      if (bw > 1 && spot_q[bw] > 1.02 * spot_q[bw - 1]) monotone = false;
    }
    const double near = spot_q[8] / spot_unq;
    const double gap = spot_q[8] / fixed_q[8];
    r.bits = {monotone && near <= 1.10 && gap <= 0.90,
              fmt("SPOT(Q) test RMSE by bits%s; non-increasing within 2%%: %s; b=8 / unquantized %.4f (limit 1.10); "
                  "SPOT(Q)/fixed(Q) at b=8 %.4f (limit 0.90)",
                  curve.c_str(), monotone ? "yes" : "no", near, gap)};
  }
  return r;
}

// ---- 8: analytic beam ----------------------------------------------------------

struct Peak {
  double angle_rad = 0.0;
  double range_m = 0.0;
};

Peak grid_peak(const PatternMap& map, const std::vector<double>& angles, const std::vector<double>& ranges) {
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    for (std::size_t j = 0; j < ranges.size(); ++j) {
      if (map.at(i, j) > map.at(bi, bj)) {
        bi = i;
        bj = j;
      }
    }
  }
  return {angles[bi], ranges[bj]};
}

Outcome analytic_beam() {
  const auto cfg = full_scale_config();
  const auto g = derive_grids(cfg);
  const int M = cfg.num_subcarriers;

  // Endpoint phases, recomputed in extended precision from the projected settings.
  double worst_phase = 0.0;
  bool peaks_ok = true;
  std::string peaks;
  const auto angles = linspace(-cfg.angle_bound_rad, cfg.angle_bound_rad, 241);
  const auto ranges = linspace(cfg.range_min_m, cfg.range_max_m, 296);
  for (double r : {10.0, 200.0}) {
    const Anchor start{-60.0 * kDeg, r}, end{60.0 * kDeg, r};
    const auto d = cbs_design(start, end, cfg, g);
    const auto proj = project_params(d.params, cfg);
    for (int n = 0; n < cfg.num_antennas; ++n) {
      for (const auto& [anchor, m] : {std::pair{start, 1}, std::pair{end, M}}) {
        const long double f = g.subcarrier_freqs_hz[m - 1];
        const long double cycles = f * static_cast<long double>(proj.delays[n]);
        const long double frac = cycles - std::nearbyint(cycles);
        const double got = proj.phi[n] - static_cast<double>(2.0L * std::numbers::pi_v<long double> * frac);
        const double want = focusing_phase(anchor, g.subcarrier_freqs_hz[m - 1], n, cfg, g);
        worst_phase = std::max(worst_phase, std::abs(std::remainder(got - want, 2.0 * std::numbers::pi)));
      }
    }
    for (const auto& [anchor, m] : {std::pair{start, 1}, std::pair{end, M}}) {
      const auto gain = grid_peak(subcarrier_gain_map(proj, m, angles, ranges, cfg, g), angles, ranges);
      const auto power = grid_peak(subcarrier_power_map(proj, m, angles, ranges, cfg, g), angles, ranges);
      const bool ok = std::abs(gain.angle_rad - anchor.angle_rad) <= 5.0 * kDeg &&
                      std::abs(gain.range_m - anchor.range_m) <= 5.0;
      peaks_ok = peaks_ok && ok;
      peaks += fmt(" [anchor (%.0f deg, %.0f m), m=%d: gain peak (%.1f deg, %.1f m), received-power peak (%.1f deg, "
                   "%.1f m)]",
                   anchor.angle_rad / kDeg, anchor.range_m, m, gain.angle_rad / kDeg, gain.range_m,
                   power.angle_rad / kDeg, power.range_m);
    }
  }

  // Index-distance slope of the range-scanning design, central differences over +/- 5 m.
  const Anchor s{0.0, 5.0}, e{0.0, 300.0};
  const auto scan = cbs_design(s, e, cfg, g);
  std::vector<double> rs;
  for (int i = 0; i <= 295; ++i) rs.push_back(5.0 + i);
  const auto curve = index_distance_curve(scan.params, 0.0, rs, cfg, g);
  auto slope_at = [&](double r) {
    const auto at = [&](double x) { return static_cast<double>(curve[static_cast<std::size_t>(x - 5.0)].index); };
    return (at(r + 5.0) - at(r - 5.0)) / 10.0;
  };
  const double near = slope_at(10.0), far = slope_at(250.0);
  const bool slope_ok = near >= 5.0 * far && near > 0.0;
  const std::string ratio = far > 0.0 ? fmt("%.1f", near / far) : std::string("unbounded");

  return {worst_phase <= 1e-6 && peaks_ok && slope_ok,
          fmt("endpoint phase error %.3g rad (limit 1e-6); peaks within 5 deg / 5 m: %s;", worst_phase,
              peaks_ok ? "yes" : "no") +
              peaks +
              fmt("; index slope %.2f /m at 10 m vs %.2f /m at 250 m, ratio %s (limit >= 5)", near, far,
                  ratio.c_str())};
}

// ---- 9: overhead ---------------------------------------------------------------

Outcome overhead() {
  const auto r = overhead_report(full_scale_config(), 8);
  const double dev = std::abs(static_cast<double>(r.flops) - 35330.0) / 35330.0;
  return {r.bits_per_user == 19 && dev <= 0.15,
          fmt("%d bits per user (%d index + %d power; target 19); %zu FLOPs, %.1f%% from 35330 (limit 15%%)",
              r.bits_per_user, r.index_bits, r.power_bits, r.flops, 100.0 * dev)};
}

// ---- 10: determinism -----------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism(const std::string& cli, const fs::path& out) {
  if (cli.empty()) return {false, "no --cli executable given"};
  const std::string small = " --n-train 600 --n-val 150 --n-test 150 --epochs 3 --batch 128 --quiet";
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen-data", "gen-data --seed 5 --n-train 600 --n-val 150 --n-test 150"},
      {"train", "train --seed 5 --data {root}/gen-data" + small},
      {"train-fixed", "train --seed 5 --fixed-beam --bits 6" + small},
      {"eval", "eval --seed 5 --checkpoint {root}/train/checkpoint.json --data {root}/gen-data/test.bin"},
      {"beam-pattern", "beam-pattern --seed 5 --angles 25 --ranges 20"},
      {"eval-lookup", "eval --seed 5 --checkpoint {root}/beam-pattern/design.json --data {root}/gen-data/test.bin"},
      {"sweep-distance", "sweep-distance --seed 5 --distances 20 35" + small},
      {"sweep-bits", "sweep-bits --seed 5 --bits 2 6 --qat-epochs 1" + small},
      {"index-curve", "index-curve --seed 5 --step 5"},
      {"overhead", "overhead --full-scale"},
  };
  std::vector<std::string> differing;
  std::size_t compared = 0;
  const fs::path roots[2] = {out / "determinism_a", out / "determinism_b"};
  for (const auto& root : roots) {
    fs::remove_all(root);
    for (const auto& [name, args] : commands) {
      std::string a = args;
      for (auto pos = a.find("{root}"); pos != std::string::npos; pos = a.find("{root}")) {
        a.replace(pos, 6, root.string());
      }
      const std::string cmd = "\"" + cli + "\" " + a + " --out \"" + (root / name).string() + "\" > /dev/null";
      if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
    }
  }
  for (const auto& entry : fs::recursive_directory_iterator(roots[0])) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), roots[0]);
    ++compared;
    const auto other = roots[1] / rel;
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) differing.push_back(rel.string());
  }
  std::string list;
  for (const auto& d : differing) list += " " + d;
  return {differing.empty() && compared > 0,
          fmt("%zu output files from %zu commands compared byte for byte, %zu differ", compared, commands.size(),
              differing.size()) +
              list};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> criteria = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::string cli, out = "acceptance_out";
  int seeds = 3;
  bool verbose = false;
  app.add_option("--criteria", criteria, "Criteria to run (1-10)")->check(CLI::Range(1, 10));
  app.add_option("--cli", cli, "Path to the ptaloc executable (criterion 10)");
  app.add_option("--out", out, "Directory for artifacts");
  app.add_option("--seeds", seeds, "Seeds for the paired training runs")->check(CLI::PositiveNumber);
  app.add_flag("--verbose", verbose, "Training progress on stderr");
  CLI11_PARSE(app, argc, argv);

  fs::create_directories(out);
  std::sort(criteria.begin(), criteria.end());
  criteria.erase(std::unique(criteria.begin(), criteria.end()), criteria.end());
  auto wanted = [&](int c) { return std::find(criteria.begin(), criteria.end(), c) != criteria.end(); };

  std::map<int, Outcome> results;
  const std::map<int, std::function<Outcome()>> simple = {
      {1, gradient_fidelity}, {2, geometry_oracle}, {3, rayleigh},   {4, invariances},
      {8, analytic_beam},     {9, overhead},        {10, [&] { return determinism(cli, out); }},
  };
  const std::map<int, std::string> names = {
      {1, "gradient fidelity"},   {2, "geometry oracle"},          {3, "Rayleigh distance"},
      {4, "beam invariances"},    {5, "trainable beam ablation"}, {6, "learned estimator ablation"},
      {7, "quantization curve"},  {8, "analytic beam behaviour"}, {9, "overhead ledger"},
      {10, "determinism"},
  };

  bool all = true;
  auto report = [&](int c, const Outcome& o) {
    std::printf("criterion %2d %-28s %s  %s\n", c, names.at(c).c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  };
  for (int c : criteria) {
    if (c >= 5 && c <= 7) continue;
    try {
      report(c, simple.at(c)());
    } catch (const std::exception& e) {
      report(c, {false, std::string("threw: ") + e.what()});
    }
  }
  if (wanted(5) || wanted(6) || wanted(7)) {
    try {
      const auto t = training_criteria(out, seeds, wanted(7), verbose);
      if (wanted(5)) report(5, t.ablation_a);
      if (wanted(6)) report(6, t.ablation_b);
      if (wanted(7)) report(7, t.bits);
    } catch (const std::exception& e) {
      for (int c : {5, 6, 7}) {
        if (wanted(c)) report(c, {false, std::string("threw: ") + e.what()});
      }
    }
  }
  return all ? 0 : 1;
}
