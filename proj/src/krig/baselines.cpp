#include "krig/baselines.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace krig {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct PhaseInputs {
  PhaseView view;
  Matrix x;  // n_inputs x steps, normalized, NaN where unobserved
};

PhaseInputs phase_inputs(const FieldReader& reader, const SplitPlan& plan, Phase phase,
                         const Normalizer& normalizer) {
  PhaseInputs in{phase_views(plan, phase), Matrix()};
  BlockValues block = read_block(reader, in.view.inputs.nodes, in.view.inputs.periods);
  in.x = block.values;
  for (Eigen::Index i = 0; i < in.x.rows(); ++i)
    for (Eigen::Index t = 0; t < in.x.cols(); ++t)
      if (block.observed(i, t)) in.x(i, t) = normalizer.forward(in.view.inputs.nodes[static_cast<std::size_t>(i)], in.x(i, t));
  return in;
}

double mean_of_observed(const Matrix& x, const std::vector<int>& rows, Eigen::Index col) {
  double sum = 0.0;
  int n = 0;
  for (int r : rows)
    if (!std::isnan(x(r, col))) {
      sum += x(r, col);
      ++n;
    }
  return n ? sum / n : kNaN;
}

}  // namespace

KrigePrediction mean_baseline(const FieldReader& reader, const SplitPlan& plan, Phase phase,
                              const Normalizer& normalizer) {
  PhaseInputs in = phase_inputs(reader, plan, phase, normalizer);
  std::vector<int> all(static_cast<std::size_t>(in.x.rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  const auto& targets = in.view.targets.nodes;
  Matrix out(static_cast<Eigen::Index>(targets.size()), in.x.cols());
  for (Eigen::Index t = 0; t < in.x.cols(); ++t) out.col(t).setConstant(mean_of_observed(in.x, all, t));
  return {targets, in.view.targets.periods, out};
}

KrigePrediction knn_baseline(const FieldReader& reader, const SplitPlan& plan, Phase phase,
                             const Normalizer& normalizer, int k) {
  const PhaseView view = phase_views(plan, phase);
  require(k >= 1 && k <= static_cast<int>(view.inputs.nodes.size()), ErrorKind::config,
          "knn k=" + std::to_string(k) + " exceeds the " + std::to_string(view.inputs.nodes.size()) + " input nodes");
  PhaseInputs in = phase_inputs(reader, plan, phase, normalizer);
  const Coords input_coords = reader.coords(in.view.inputs.nodes);
  const Coords target_coords = reader.coords(in.view.targets.nodes);
  Matrix out(static_cast<Eigen::Index>(target_coords.size()), in.x.cols());
  for (std::size_t j = 0; j < target_coords.size(); ++j) {
    const auto nearest = nearest_of(target_coords[j], input_coords, k);
    for (Eigen::Index t = 0; t < in.x.cols(); ++t)
      out(static_cast<Eigen::Index>(j), t) = mean_of_observed(in.x, nearest, t);
  }
  return {in.view.targets.nodes, in.view.targets.periods, out};
}

Matrix gp_conditional_mean(const Coords& inputs, const Coords& targets, const Matrix& x_obs,
                           const GpKernelSpec& kernel) {
  require(inputs.size() >= 2, ErrorKind::config, "kriging needs at least 2 input nodes");
  require(x_obs.rows() == static_cast<Eigen::Index>(inputs.size()), ErrorKind::shape,
          "input value rows != input coordinate count");
  require(kernel.nugget >= 0.0, ErrorKind::config, "kriging nugget must be nonnegative");
  double ell = kernel.length_scale;
  if (ell <= 0.0) {
    Coords all = inputs;
    all.insert(all.end(), targets.begin(), targets.end());
    ell = pairwise_distance_std(all);
  }
  require(ell > 0.0, ErrorKind::config, "kriging length scale must be positive");
  const Matrix K_oo = se_kernel_matrix(inputs, inputs, ell);
  const Matrix K_uo = se_kernel_matrix(targets, inputs, ell);

  // Group steps by their observed-input pattern so each pattern is factored once.
  std::map<std::vector<bool>, std::vector<Eigen::Index>> groups;
  for (Eigen::Index t = 0; t < x_obs.cols(); ++t) {
    std::vector<bool> pattern(static_cast<std::size_t>(x_obs.rows()));
    for (Eigen::Index i = 0; i < x_obs.rows(); ++i) pattern[static_cast<std::size_t>(i)] = !std::isnan(x_obs(i, t));
    groups[pattern].push_back(t);
  }

  Matrix out(static_cast<Eigen::Index>(targets.size()), x_obs.cols());
  for (const auto& [pattern, cols] : groups) {
    std::vector<Eigen::Index> obs;
    for (std::size_t i = 0; i < pattern.size(); ++i)
      if (pattern[i]) obs.push_back(static_cast<Eigen::Index>(i));
    if (obs.empty()) {
      for (Eigen::Index t : cols) out.col(t).setConstant(kNaN);
      continue;
    }
    const auto no = static_cast<Eigen::Index>(obs.size());
    Matrix K(no, no), Kuo(K_uo.rows(), no);
    for (Eigen::Index a = 0; a < no; ++a) {
      for (Eigen::Index b = 0; b < no; ++b) K(a, b) = K_oo(obs[a], obs[b]);
      Kuo.col(a) = K_uo.col(obs[a]);
    }
    K.diagonal().array() += kernel.nugget;
    const Eigen::LLT<Matrix> llt = factor_spd(K, 0.0, 1e-4 + kernel.nugget);
    Matrix rhs(no, static_cast<Eigen::Index>(cols.size()));
    Vector mu = Vector::Zero(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      for (Eigen::Index a = 0; a < no; ++a) rhs(a, static_cast<Eigen::Index>(c)) = x_obs(obs[a], cols[c]);
      if (kernel.center) mu(static_cast<Eigen::Index>(c)) = rhs.col(static_cast<Eigen::Index>(c)).mean();
    }
    rhs.rowwise() -= mu.transpose();
    Matrix pred = Kuo * llt.solve(rhs);
    pred.rowwise() += mu.transpose();
    for (std::size_t c = 0; c < cols.size(); ++c) out.col(cols[c]) = pred.col(static_cast<Eigen::Index>(c));
  }
  return out;
}

KrigePrediction okriging(const FieldReader& reader, const SplitPlan& plan, Phase phase,
                         const Normalizer& normalizer, const GpKernelSpec& kernel) {
  PhaseInputs in = phase_inputs(reader, plan, phase, normalizer);
  const Coords input_coords = reader.coords(in.view.inputs.nodes);
  const Coords target_coords = reader.coords(in.view.targets.nodes);
  return {in.view.targets.nodes, in.view.targets.periods,
          gp_conditional_mean(input_coords, target_coords, in.x, kernel)};
}

}  // namespace krig
