#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ptaloc {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed list of parameter groups. Each group has its own size
/// and a learning-rate multiplier; moments are kept per element.
class Adam {
 public:
  struct Group {
    std::size_t size = 0;
    double lr_scale = 1.0;
    std::vector<double> m;
    std::vector<double> v;
  };

  Adam(const std::vector<std::size_t>& sizes, AdamOptions opts, const std::vector<double>& lr_scales = {});

  /// One update. `params[g]` and `grads[g]` must have the size of group g.
  void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads);

  double lr() const { return opts_.lr; }
  void set_lr(double lr) { opts_.lr = lr; }
  std::int64_t steps() const { return t_; }
  const AdamOptions& options() const { return opts_; }
  const std::vector<Group>& groups() const { return groups_; }

  /// Restores moments and step count saved from another instance of the same shape.
  void restore(const std::vector<Group>& groups, std::int64_t steps);

 private:
  AdamOptions opts_;
  std::vector<Group> groups_;
  std::int64_t t_ = 0;
};

}  // namespace ptaloc
