#include "ptaloc/checkpoint.hpp"

#include <fstream>

#include "json.hpp"
#include "ptaloc/error.hpp"

namespace ptaloc {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "ptaloc-checkpoint";

json anchor_json(const Anchor& a) { return {{"angle_rad", a.angle_rad}, {"range_m", a.range_m}}; }

Anchor anchor_from(const json& j) { return {j.at("angle_rad").get<double>(), j.at("range_m").get<double>()}; }

std::uint64_t parse_hash(const std::string& hex) {
  std::size_t used = 0;
  const auto v = std::stoull(hex, &used, 16);
  if (used != hex.size()) throw FormatError("bad config hash '" + hex + "'");
  return v;
}

}  // namespace

Checkpoint make_checkpoint(const TrainResult& result, const SystemConfig& cfg, std::uint64_t seed) {
  Checkpoint c;
  c.kind = CheckpointKind::trained;
  c.config_hash = config_hash(cfg);
  c.model = result.best;
  c.has_estimator = true;
  c.seed = seed;
  c.best_epoch = result.best_epoch;
  c.best_val_rmse = result.best_val_rmse;
  return c;
}

Checkpoint make_checkpoint(const CbsDesign& design, const SystemConfig& cfg) {
  Checkpoint c;
  c.kind = CheckpointKind::analytic;
  c.config_hash = config_hash(cfg);
  c.model.beam = design.params;
  c.model.scaling.num_subcarriers = cfg.num_subcarriers;
  c.has_estimator = false;
  c.start = design.start;
  c.end = design.end;
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json j;
  j["format"] = kFormat;
  j["version"] = kCheckpointVersion;
  j["kind"] = ckpt.kind == CheckpointKind::trained ? "trained" : "analytic";
  j["config_hash"] = hash_hex(ckpt.config_hash);
  j["beam"] = {{"theta_phi", ckpt.model.beam.theta_phi}, {"theta_t", ckpt.model.beam.theta_t}};
  if (ckpt.has_estimator) {
    j["mlp"] = {{"dims", ckpt.model.mlp.dims},
                {"weights", ckpt.model.mlp.weights},
                {"biases", ckpt.model.mlp.biases}};
    j["scaling"] = {{"power_lo_dbm", ckpt.model.scaling.power.lo_dbm},
                    {"power_hi_dbm", ckpt.model.scaling.power.hi_dbm},
                    {"num_subcarriers", ckpt.model.scaling.num_subcarriers}};
    j["quantizer"] = {{"lo_dbm", ckpt.model.quantizer.lo_dbm}, {"hi_dbm", ckpt.model.quantizer.hi_dbm}};
    j["bits"] = ckpt.model.bits ? json(*ckpt.model.bits) : json(nullptr);
    j["training"] = {{"seed", ckpt.seed}, {"best_epoch", ckpt.best_epoch}, {"best_val_rmse", ckpt.best_val_rmse}};
  }
  if (ckpt.start && ckpt.end) j["anchors"] = {{"start", anchor_json(*ckpt.start)}, {"end", anchor_json(*ckpt.end)}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << j.dump(1) << '\n';
  if (!out) throw Error("failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  Checkpoint c;
  try {
    const json j = json::parse(in);
    if (j.at("format").get<std::string>() != kFormat) throw FormatError("'" + path + "' is not a checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version in '" + path + "'");
    }
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "trained") {
      c.kind = CheckpointKind::trained;
    } else if (kind == "analytic") {
      c.kind = CheckpointKind::analytic;
    } else {
      throw FormatError("unknown checkpoint kind '" + kind + "'");
    }
    c.config_hash = parse_hash(j.at("config_hash").get<std::string>());
    c.model.beam.theta_phi = j.at("beam").at("theta_phi").get<std::vector<double>>();
    c.model.beam.theta_t = j.at("beam").at("theta_t").get<std::vector<double>>();
    if (c.model.beam.theta_phi.size() != c.model.beam.theta_t.size()) {
      throw FormatError("checkpoint beam vectors differ in length");
    }
    c.has_estimator = j.contains("mlp");
    if (c.has_estimator) {
      const auto& m = j.at("mlp");
      c.model.mlp.dims = m.at("dims").get<std::vector<int>>();
      c.model.mlp.weights = m.at("weights").get<std::vector<std::vector<double>>>();
      c.model.mlp.biases = m.at("biases").get<std::vector<std::vector<double>>>();
      const auto& d = c.model.mlp.dims;
      if (d.size() < 2 || c.model.mlp.weights.size() != d.size() - 1 || c.model.mlp.biases.size() != d.size() - 1) {
        throw FormatError("checkpoint estimator layers do not match its dims");
      }
      for (std::size_t l = 0; l + 1 < d.size(); ++l) {
        if (d[l] < 1 || d[l + 1] < 1 ||
            c.model.mlp.weights[l].size() != static_cast<std::size_t>(d[l]) * static_cast<std::size_t>(d[l + 1]) ||
            c.model.mlp.biases[l].size() != static_cast<std::size_t>(d[l + 1])) {
          throw FormatError("checkpoint estimator layer " + std::to_string(l) + " has the wrong size");
        }
      }
      const auto& s = j.at("scaling");
      c.model.scaling.power = {s.at("power_lo_dbm").get<double>(), s.at("power_hi_dbm").get<double>()};
      c.model.scaling.num_subcarriers = s.at("num_subcarriers").get<int>();
      c.model.quantizer = {j.at("quantizer").at("lo_dbm").get<double>(), j.at("quantizer").at("hi_dbm").get<double>()};
      if (!j.at("bits").is_null()) c.model.bits = j.at("bits").get<int>();
      const auto& t = j.at("training");
      c.seed = t.at("seed").get<std::uint64_t>();
      c.best_epoch = t.at("best_epoch").get<int>();
      c.best_val_rmse = t.at("best_val_rmse").get<double>();
    }
    if (j.contains("anchors")) {
      c.start = anchor_from(j.at("anchors").at("start"));
      c.end = anchor_from(j.at("anchors").at("end"));
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed checkpoint '" + path + "': " + e.what());
  }
  return c;
}

Checkpoint load_checkpoint(const std::string& path, const SystemConfig& cfg) {
  Checkpoint c = load_checkpoint(path);
  const auto expected = config_hash(cfg);
  if (c.config_hash != expected) {
    throw HashMismatchError("checkpoint '" + path + "' was built for config " + hash_hex(c.config_hash) +
                            ", active config is " + hash_hex(expected));
  }
  if (c.model.beam.theta_phi.size() != static_cast<std::size_t>(cfg.num_antennas)) {
    throw FormatError("checkpoint '" + path + "' has the wrong number of antennas");
  }
  return c;
}

LossReport evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& data, const SystemConfig& cfg,
                               const DerivedGrids& grids, std::optional<std::uint64_t> noise_seed,
                               std::optional<int> bits) {
  const auto expected = config_hash(cfg);
  if (ckpt.config_hash != expected || data.config_hash != expected) {
    throw HashMismatchError("checkpoint " + hash_hex(ckpt.config_hash) + " and dataset " +
                            hash_hex(data.config_hash) + " must both match config " + hash_hex(expected));
  }
  if (!ckpt.has_estimator) throw Error("evaluate_checkpoint: analytic checkpoints carry no estimator");
  SpotModel model = ckpt.model;
  if (bits) model.bits = *bits > 0 ? std::optional<int>(*bits) : std::nullopt;
  return evaluate(model, data, cfg, grids, noise_seed);
}

}  // namespace ptaloc
