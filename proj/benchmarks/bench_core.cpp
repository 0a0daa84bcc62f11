// Hot paths of one training step at desk scale, plus the per-user estimator
// cost that the overhead ledger counts.

#include <benchmark/benchmark.h>

#include <vector>

#include "ptaloc/cbs.hpp"
#include "ptaloc/field.hpp"
#include "ptaloc/mlp.hpp"
#include "ptaloc/pipeline.hpp"
#include "ptaloc/trainer.hpp"

using namespace ptaloc;

namespace {

struct DeskFixture {
  SystemConfig cfg = desk_scale_config();
  DerivedGrids grids = derive_grids(cfg);
  CbsDesign cbs = default_cbs_design(cfg, grids);
  std::vector<UserPosition> users;

  explicit DeskFixture(std::size_t k) : users(sample_users(k, cfg, 3, Split::train).users) {}
};

void BM_PtaField(benchmark::State& state) {
  const DeskFixture f(static_cast<std::size_t>(state.range(0)));
  const auto proj = project_params(f.cbs.params, f.cfg);
  for (auto _ : state) benchmark::DoNotOptimize(pta_field(f.users, proj, f.cfg, f.grids));
  state.SetItemsProcessed(state.iterations() * state.range(0) * f.cfg.num_subcarriers);
}
BENCHMARK(BM_PtaField)->Arg(1)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_ChannelBatch(benchmark::State& state) {
  const DeskFixture f(static_cast<std::size_t>(state.range(0)));
  std::vector<cplx> h(f.users.size() * f.cfg.num_subcarriers * f.cfg.num_antennas);
  for (auto _ : state) {
    channel_batch(f.users, f.cfg, f.grids, h);
    benchmark::DoNotOptimize(h.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(h.size()));
}
BENCHMARK(BM_ChannelBatch)->Arg(16)->Unit(benchmark::kMicrosecond);

void BM_EstimatorForward(benchmark::State& state) {
  const auto mlp = init_mlp(default_mlp_dims(), 5, 20.0);
  std::vector<double> features(2 * static_cast<std::size_t>(state.range(0)), 0.25);
  for (auto _ : state) benchmark::DoNotOptimize(mlp_forward(mlp, features, desk_scale_config().angle_bound_rad));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EstimatorForward)->Arg(1)->Arg(256);

void BM_TrainStep(benchmark::State& state) {
  const DeskFixture f(256);
  const auto data = sample_users(2000, f.cfg, 4, Split::train);
  const auto model = init_model(f.cbs.params, data, f.cfg, f.grids, 6);
  const auto seeds = sample_noise_seeds(8, f.users.size());
  const auto coords = to_coordinates(model.beam, f.cfg);
  const auto path = static_cast<FeedbackPath>(state.range(0));
  for (auto _ : state) {
    ad::Tape tape;
    const auto cp = tape.parameter({coords.carrier_phase.size()}, coords.carrier_phase);
    const auto du = tape.parameter({coords.delay_units.size()}, coords.delay_units);
    const auto field = taped_received_field(cp, du, f.users, f.cfg, f.grids);
    const auto noise = taped_noise(tape, seeds, f.cfg, f.grids);
    const auto mlp = make_taped_mlp(tape, model.mlp);
    const auto est = taped_localize(field, noise, mlp, model.scaling, std::nullopt, model.quantizer, f.cfg, path);
    const auto loss = taped_rmse(est, f.users);
    tape.backward(loss);
    benchmark::DoNotOptimize(cp.grad().data());
  }
  state.SetLabel(path == FeedbackPath::soft ? "soft" : "straight-through");
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
