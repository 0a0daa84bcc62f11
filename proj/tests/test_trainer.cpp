#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "ptaloc/adam.hpp"
#include "ptaloc/cbs.hpp"
#include "ptaloc/checkpoint.hpp"
#include "ptaloc/error.hpp"
#include "ptaloc/trainer.hpp"

using namespace ptaloc;
namespace fs = std::filesystem;

namespace {

// Tiny desk-band problem that trains in well under a second.
SystemConfig small_config() {
  SystemConfig cfg = desk_scale_config();
  cfg.num_antennas = 16;
  cfg.num_subcarriers = 32;
  cfg.bandwidth_hz = 32 * cfg.subcarrier_spacing_hz;
  cfg.range_max_m = 20.0;
  return cfg;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ptaloc_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("Adam reproduces the textbook update") {
  Adam adam({2}, AdamOptions{0.1, 0.9, 0.999, 1e-8}, {1.0});
  std::vector<double> p = {1.0, -2.0};
  const std::vector<double> g1 = {0.5, -4.0};
  std::vector<std::span<double>> params = {p};
  std::vector<std::span<const double>> grads = {g1};
  adam.step(params, grads);
  // First step: mhat = g and vhat = g^2, so each parameter moves by about lr * sign(g).
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(-2.0 + 0.1 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
  const std::vector<double> g2 = {1.0, 1.0};
  grads = {g2};
  adam.step(params, grads);
  const double m = 0.9 * 0.1 * 0.5 + 0.1 * 1.0, v = 0.999 * 0.001 * 0.25 + 0.001 * 1.0;
  const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8) - 0.1 * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-12));
  CHECK(adam.steps() == 2);
}

TEST_CASE("Adam applies per-group learning-rate scales") {
  Adam adam({1, 1}, AdamOptions{0.01, 0.9, 0.999, 1e-8}, {1.0, 10.0});
  std::vector<double> a = {0.0}, b = {0.0};
  const std::vector<double> g = {2.0};
  std::vector<std::span<double>> params = {a, b};
  std::vector<std::span<const double>> grads = {g, g};
  adam.step(params, grads);
  CHECK(a[0] == doctest::Approx(-0.01));
  CHECK(b[0] == doctest::Approx(-0.1));
  adam.set_lr(0.5);
  CHECK(adam.lr() == 0.5);
}

TEST_CASE("RMSE helpers") {
  std::vector<PositionEstimate> est(2);
  std::vector<UserPosition> truth = {UserPosition::from_polar(0.0, 3.0), UserPosition::from_polar(0.0, 4.0)};
  est[0].x_m = 3.0;
  est[0].y_m = 4.0;
  est[0].range_m = 5.0;
  est[1].x_m = 4.0;
  est[1].range_m = 4.0;
  const auto r = loss_rmse(est, truth);
  CHECK(r.rmse_2d_m == doctest::Approx(std::sqrt(16.0 / 2.0)));
  CHECK(r.range_rmse_m == doctest::Approx(std::sqrt(4.0 / 2.0)));
  CHECK(r.squared_errors == std::vector<double>{16.0, 0.0});
  CHECK_THROWS_AS(loss_rmse({}, {}), Error);
}

TEST_CASE("training reduces the validation error and is reproducible") {
  const auto cfg = small_config();
  const auto g = derive_grids(cfg);
  const auto data = make_splits(cfg, 600, 150, 150, 4);
  const auto cbs = default_cbs_design(cfg, g);
  const auto start = init_model(cbs.params, data.train, cfg, g, 2);
  CHECK(start.quantizer.hi_dbm > start.quantizer.lo_dbm);
  TrainOptions o;
  o.max_epochs = 6;
  o.batch_size = 64;
  o.seed = 3;
  const auto a = train(start, data.train, data.val, cfg, g, o);
  const auto b = train(start, data.train, data.val, cfg, g, o);
  CHECK(a.best_val_rmse < a.initial_val_rmse);
  CHECK(a.log.size() == 6u);
  CHECK(a.best.mlp.weights == b.best.mlp.weights);
  CHECK(a.best.beam.theta_phi == b.best.beam.theta_phi);
  CHECK(a.final_state.steps == 6 * 10);
  // The returned best model scores its recorded validation error.
  const auto re = evaluate(a.best, data.val, cfg, g, validation_noise_seed(o));
  CHECK(re.rmse_2d_m == doctest::Approx(a.best_val_rmse).epsilon(1e-12));
  CHECK(centroid_rmse(data.train, data.val) > 0.0);
  // The quantizer range follows the learned beam.
  const auto refit = calibrate_power_range(a.best.beam, data.train.users, cfg, g, derive_seed(o.seed, 0xca1));
  CHECK(a.best.quantizer.lo_dbm == refit.lo_dbm);
  CHECK(a.best.quantizer.hi_dbm == refit.hi_dbm);
  CHECK(a.best.scaling.power.lo_dbm == start.scaling.power.lo_dbm);
}

TEST_CASE("fixed-beam training leaves the beam untouched") {
  const auto cfg = small_config();
  const auto g = derive_grids(cfg);
  const auto data = make_splits(cfg, 300, 100, 100, 5);
  const auto cbs = default_cbs_design(cfg, g);
  const auto start = init_model(cbs.params, data.train, cfg, g, 2);
  TrainOptions o;
  o.max_epochs = 3;
  o.train_beam = false;
  const auto r = train(start, data.train, data.val, cfg, g, o);
  CHECK(r.final_state.model.beam.theta_phi == cbs.params.theta_phi);
  CHECK(r.final_state.model.beam.theta_t == cbs.params.theta_t);
  CHECK(r.final_state.model.mlp.weights != start.mlp.weights);
  CHECK(r.best.quantizer.lo_dbm == start.quantizer.lo_dbm);
}

TEST_CASE("divergence is reported rather than silently continued") {
  const auto cfg = small_config();
  const auto g = derive_grids(cfg);
  const auto data = make_splits(cfg, 100, 50, 50, 6);
  auto start = init_model(default_cbs_design(cfg, g).params, data.train, cfg, g, 2);
  start.mlp.biases.back()[1] = std::nan("");
  TrainOptions o;
  o.max_epochs = 2;
  CHECK_THROWS_AS(train(start, data.train, data.val, cfg, g, o), Error);
}

TEST_CASE("checkpoints round-trip and guard their config") {
  const auto cfg = small_config();
  const auto g = derive_grids(cfg);
  const auto data = make_splits(cfg, 200, 80, 80, 7);
  const auto start = init_model(default_cbs_design(cfg, g).params, data.train, cfg, g, 2);
  TrainOptions o;
  o.max_epochs = 2;
  o.bits = 5;
  const auto r = train(start, data.train, data.val, cfg, g, o);
  const auto ck = make_checkpoint(r, cfg, 7);
  const auto path = scratch("ckpt.json").string();
  save_checkpoint(ck, path);
  const auto back = load_checkpoint(path, cfg);
  CHECK(back.model.mlp.weights == ck.model.mlp.weights);
  CHECK(back.model.beam.theta_t == ck.model.beam.theta_t);
  CHECK(back.model.quantizer.lo_dbm == ck.model.quantizer.lo_dbm);
  CHECK(back.model.bits == std::optional<int>(5));
  const auto e1 = evaluate_checkpoint(ck, data.test, cfg, g, 1);
  const auto e2 = evaluate_checkpoint(back, data.test, cfg, g, 1);
  CHECK(e1.rmse_2d_m == e2.rmse_2d_m);
  const auto unq = evaluate_checkpoint(back, data.test, cfg, g, 1, 0);
  CHECK(unq.rmse_2d_m != e1.rmse_2d_m);

  auto other = cfg;
  other.tx_power_dbm = 30.0;
  CHECK_THROWS_AS(load_checkpoint(path, other), HashMismatchError);
  std::ofstream(scratch("bad.json")) << "{\"format\": \"something-else\"}";
  CHECK_THROWS_AS(load_checkpoint(scratch("bad.json").string()), FormatError);

  const auto design = default_cbs_design(cfg, g);
  const auto ack = make_checkpoint(design, cfg);
  save_checkpoint(ack, scratch("design.json").string());
  const auto aback = load_checkpoint(scratch("design.json").string(), cfg);
  CHECK(aback.kind == CheckpointKind::analytic);
  CHECK_FALSE(aback.has_estimator);
  REQUIRE(aback.start.has_value());
  CHECK(aback.start->angle_rad == design.start.angle_rad);
  CHECK(aback.model.beam.theta_phi == design.params.theta_phi);
}
