#include <cmath>
#include <random>

#include "doctest.h"
#include "ptaloc/cbs.hpp"
#include "ptaloc/error.hpp"
#include "ptaloc/field.hpp"
#include "ptaloc/pipeline.hpp"
#include "support.hpp"

using namespace ptaloc;
using testing::toy_params;
using testing::toy_problem;

TEST_CASE("full training loss gradient matches central differences on the toy array") {
  auto prob = toy_problem(20, 5);
  auto params = toy_params(prob.cfg, 3);
  std::vector<double> grad;
  prob.loss(params, &grad);
  const auto slots = params.slots();
  REQUIRE(grad.size() == slots.size());
  const auto r = testing::check_gradients([&] { return prob.loss(params, nullptr); }, slots, grad, 1e-5);
  INFO("worst slot " << r.worst << " of " << r.count << ": analytic " << r.worst_analytic << ", numeric "
                     << r.worst_numeric);
  CHECK(r.max_rel < 1e-4);
}

TEST_CASE("loss is the root of the mean of independently computed per-sample errors") {
  auto prob = toy_problem(13, 8);
  auto params = toy_params(prob.cfg, 4);
  const double loss = prob.loss(params, nullptr);
  double sum = 0.0;
  for (std::size_t k = 0; k < prob.users.size(); ++k) {
    auto single = prob;
    single.users = {prob.users[k]};
    single.seeds = {prob.seeds[k]};
    const double e = single.loss(params, nullptr);
    sum += e * e;
  }
  CHECK(loss == doctest::Approx(std::sqrt(sum / 13.0)).epsilon(1e-12));
}

TEST_CASE("taped soft feedback equals the plain soft feedback") {
  const auto cfg = desk_scale_config();
  const auto g = derive_grids(cfg);
  const auto users = sample_users(5, cfg, 2, Split::val).users;
  const auto beam = default_cbs_design(cfg, g).params;
  const auto field = pta_field(users, project_params(beam, cfg), cfg, g);
  const auto seeds = sample_noise_seeds(4, users.size());
  const auto powers = received_powers(field, seeds, cfg, g);
  const auto soft = soft_feedback(powers, cfg);

  ad::Tape t;
  const auto y = ad::add(t.constant({5, 256}, std::vector<cplx>(field)), taped_noise(t, seeds, cfg, g));
  const auto p = ad::abs_squared(y);
  const auto w = ad::softmax_scaled(ad::max_normalize_rows(p), cfg.softmax_temperature);
  std::vector<double> ramp(256);
  for (std::size_t m = 0; m < 256; ++m) ramp[m] = static_cast<double>(m + 1);
  const auto idx = ad::row_dot(w, ramp);
  const auto dbm = ad::to_dbm(ad::row_sum(ad::mul(w, p)));
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(idx.data()[k] == doctest::Approx(soft.soft_index[k]).epsilon(1e-12));
    CHECK(dbm.data()[k] == doctest::Approx(soft.power_dbm[k]).epsilon(1e-12));
  }
}

TEST_CASE("straight-through training features equal the deployed features") {
  const auto cfg = desk_scale_config();
  const auto g = derive_grids(cfg);
  const auto users = sample_users(9, cfg, 6, Split::val).users;
  const auto beam = default_cbs_design(cfg, g).params;
  const auto seeds = sample_noise_seeds(1, users.size());
  SpotModel model;
  model.beam = beam;
  model.mlp = init_mlp(default_mlp_dims(), 2, 20.0);
  model.scaling.num_subcarriers = 256;
  model.scaling.power = {-45.0, -20.0};
  model.quantizer = model.scaling.power;
  const auto deployed = localize(model, users, seeds, cfg, g);

  ad::Tape t;
  const auto coords = to_coordinates(beam, cfg);
  const auto cp = t.parameter({64}, coords.carrier_phase);
  const auto du = t.parameter({64}, coords.delay_units);
  const auto field = taped_received_field(cp, du, users, cfg, g);
  const auto est = taped_localize(field, taped_noise(t, seeds, cfg, g), make_taped_mlp(t, model.mlp), model.scaling,
                                  std::nullopt, model.quantizer, cfg, FeedbackPath::straight_through);
  for (std::size_t k = 0; k < users.size(); ++k) {
    CHECK(est.x.data()[k] == doctest::Approx(deployed[k].x_m).epsilon(1e-9));
    CHECK(est.y.data()[k] == doctest::Approx(deployed[k].y_m).epsilon(1e-9));
  }
  t.backward(taped_rmse(est, users));
  double norm = 0.0;
  for (double v : cp.grad()) norm += v * v;
  CHECK(norm > 0.0);
}

TEST_CASE("deployed localization composes measurement, features and estimator") {
  const auto cfg = desk_scale_config();
  const auto g = derive_grids(cfg);
  const auto users = sample_users(7, cfg, 10, Split::test).users;
  SpotModel model;
  model.beam = default_cbs_design(cfg, g).params;
  model.mlp = init_mlp(default_mlp_dims(), 8, 25.0);
  model.scaling.num_subcarriers = 256;
  model.scaling.power = {-45.0, -20.0};
  model.quantizer = model.scaling.power;
  model.bits = 4;
  const auto seeds = sample_noise_seeds(3, users.size());
  const auto est = localize(model, users, seeds, cfg, g);
  const auto msgs = measure_users(model.beam, users, seeds, cfg, g, 4, model.quantizer);
  for (std::size_t k = 0; k < users.size(); ++k) {
    const auto h = channel_matrix(users[k], cfg, g);
    const auto y = received_signal(h, project_params(model.beam, cfg), g, cfg, seeds[k]);
    std::vector<double> p;
    for (auto v : y) p.push_back(std::norm(v));
    const auto msg = measure_feedback(p, cfg.softmax_temperature, 4, model.quantizer);
    CHECK(msg.subcarrier_index == msgs[k].subcarrier_index);
    CHECK(msg.power_dbm == doctest::Approx(msgs[k].power_dbm).epsilon(1e-12));
    const auto e = mlp_forward(model.mlp, model.scaling.power_feature(msg.power_dbm),
                               model.scaling.index_feature(msg.subcarrier_index), cfg.angle_bound_rad);
    CHECK(e.x_m == doctest::Approx(est[k].x_m).epsilon(1e-12));
  }
  CHECK_THROWS_AS(localize(model, users, std::vector<std::uint64_t>{1, 2}, cfg, g), Error);
}

TEST_CASE("feature scaling maps the calibrated range and index grid onto [-1, 1]") {
  FeatureScaling s;
  s.power = {-43.0, -24.0};
  s.num_subcarriers = 256;
  CHECK(s.power_feature(-43.0) == doctest::Approx(-1.0));
  CHECK(s.power_feature(-24.0) == doctest::Approx(1.0));
  CHECK(s.index_feature(1.0) == doctest::Approx(-1.0 + 1.0 / 256));
  CHECK(s.index_feature(256.0) == doctest::Approx(1.0 - 1.0 / 256));
}
