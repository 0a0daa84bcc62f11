#include "ptaloc/adam.hpp"

#include <cmath>

#include "ptaloc/error.hpp"

namespace ptaloc {

Adam::Adam(const std::vector<std::size_t>& sizes, AdamOptions opts, const std::vector<double>& lr_scales)
    : opts_(opts) {
  if (!lr_scales.empty() && lr_scales.size() != sizes.size()) throw Error("Adam: one lr scale per group");
  if (!(opts.lr > 0.0) || !(opts.eps > 0.0) || opts.beta1 < 0.0 || opts.beta1 >= 1.0 || opts.beta2 < 0.0 ||
      opts.beta2 >= 1.0) {
    throw Error("Adam: invalid hyperparameters");
  }
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    Group grp;
    grp.size = sizes[g];
    grp.lr_scale = lr_scales.empty() ? 1.0 : lr_scales[g];
    grp.m.assign(sizes[g], 0.0);
    grp.v.assign(sizes[g], 0.0);
    groups_.push_back(std::move(grp));
  }
}

void Adam::step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads) {
  if (params.size() != groups_.size() || grads.size() != groups_.size()) throw Error("Adam: group count mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    auto& grp = groups_[g];
    if (params[g].size() != grp.size || grads[g].size() != grp.size) throw Error("Adam: group size mismatch");
    const double lr = opts_.lr * grp.lr_scale;
    for (std::size_t i = 0; i < grp.size; ++i) {
      const double gi = grads[g][i];
      grp.m[i] = opts_.beta1 * grp.m[i] + (1.0 - opts_.beta1) * gi;
      grp.v[i] = opts_.beta2 * grp.v[i] + (1.0 - opts_.beta2) * gi * gi;
      const double mhat = grp.m[i] / bc1;
      const double vhat = grp.v[i] / bc2;
      params[g][i] -= lr * mhat / (std::sqrt(vhat) + opts_.eps);
    }
  }
}

void Adam::restore(const std::vector<Group>& groups, std::int64_t steps) {
  if (groups.size() != groups_.size()) throw Error("Adam: restore group count mismatch");
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].m.size() != groups_[g].size || groups[g].v.size() != groups_[g].size) {
      throw Error("Adam: restore group size mismatch");
    }
    groups_[g].m = groups[g].m;
    groups_[g].v = groups[g].v;
  }
  t_ = steps;
}

}  // namespace ptaloc
