#include "krig/evalshift.hpp"

#include <algorithm>
#include <cmath>

namespace krig {

MetricReport score(const Matrix& pred, const Matrix& truth, const BoolMatrix& cells, Phase phase,
                   double mape_floor, bool per_step) {
  require(pred.rows() == truth.rows() && pred.cols() == truth.cols() && cells.rows() == truth.rows() &&
              cells.cols() == truth.cols(),
          ErrorKind::shape, "prediction, truth and cell mask shapes differ");
  MetricReport r;
  r.phase = phase;
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
  if (per_step) r.per_step_mae.assign(static_cast<std::size_t>(truth.cols()), 0.0);
  for (Eigen::Index t = 0; t < truth.cols(); ++t) {
    double step_sum = 0.0;
    int step_n = 0;
    for (Eigen::Index i = 0; i < truth.rows(); ++i) {
      if (!cells(i, t)) continue;
      require(!std::isnan(pred(i, t)), ErrorKind::config, "a scored cell has no prediction");
      const double e = std::abs(truth(i, t) - pred(i, t));
      abs_sum += e;
      sq_sum += e * e;
      step_sum += e;
      ++step_n;
      ++r.cell_count;
      if (std::abs(truth(i, t)) > mape_floor) {
        pct_sum += e / std::abs(truth(i, t));
        ++r.mape_cell_count;
      }
    }
    if (per_step) r.per_step_mae[static_cast<std::size_t>(t)] = step_n ? step_sum / step_n : std::nan("");
  }
  require(r.cell_count > 0, ErrorKind::config, "scoring needs at least one cell");
  const double n = static_cast<double>(r.cell_count);
  r.mae = abs_sum / n;
  r.rmse = std::sqrt(sq_sum / n);
  if (r.mape_cell_count > 0) r.mape = 100.0 * pct_sum / static_cast<double>(r.mape_cell_count);
  return r;
}

MetricReport score(const Vector& pred, const Vector& truth, Phase phase, double mape_floor) {
  const BoolMatrix all = BoolMatrix::Constant(truth.size(), 1, true);
  return score(Matrix(pred), Matrix(truth), all, phase, mape_floor);
}

double generalization_ratio(const MetricReport& test, const MetricReport& val) {
  require(val.mae > 0.0, ErrorKind::undefined_ratio, "validation MAE is zero; the ratio is undefined");
  return test.mae / val.mae;
}

Vector sorted_spectrum(const Matrix& M) {
  if (M.rows() == 0) return Vector();
  const Matrix sym = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues();  // ascending
}

double wasserstein1(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), ErrorKind::config, "Wasserstein distance needs two nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  // Integrate |F_a - F_b| between consecutive points of the merged sample.
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(a.front(), b.front());
  double total = 0.0;
  while (i < a.size() || j < b.size()) {
    double next;
    if (j == b.size() || (i < a.size() && a[i] <= b[j])) next = a[i];
    else next = b[j];
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
    prev = next;
    while (i < a.size() && a[i] == next) ++i;
    while (j < b.size() && b[j] == next) ++j;
  }
  return total;
}

ShiftReport shift_report(const SpatialGraph& full, const std::vector<int>& observed_ids) {
  const BlockPartition p = block_partition(full, observed_ids);
  ShiftReport r;
  r.n_observed = static_cast<int>(p.observed.size());
  r.n_unseen = static_cast<int>(p.unseen.size());
  require(r.n_observed >= 1 && r.n_unseen >= 1, ErrorKind::config,
          "observed set must be a nonempty strict subset of the graph");

  const Matrix A_hat = sym_normalize(full.adjacency);
  Matrix restricted(r.n_observed, r.n_observed);
  for (int i = 0; i < r.n_observed; ++i)
    for (int j = 0; j < r.n_observed; ++j)
      restricted(i, j) = A_hat(p.observed[static_cast<std::size_t>(i)], p.observed[static_cast<std::size_t>(j)]);
  const Vector s_full = sorted_spectrum(restricted);
  const Vector s_obs = sorted_spectrum(sym_normalize(p.rebuilt_oo));
  r.spectral_drift = (s_full - s_obs).cwiseAbs().maxCoeff();

  r.degree_shift.resize(static_cast<std::size_t>(r.n_observed));
  for (int i = 0; i < r.n_observed; ++i) r.degree_shift[static_cast<std::size_t>(i)] = p.ou.row(i).sum();
  r.no_cross_block_edges = (p.ou.array() == 0.0).all() && (p.uo.array() == 0.0).all();

  std::vector<double> d_oo, d_uo;
  for (int i = 0; i < r.n_observed; ++i)
    for (int j = i + 1; j < r.n_observed; ++j)
      d_oo.push_back(euclidean(full.coords[static_cast<std::size_t>(p.observed[static_cast<std::size_t>(i)])],
                               full.coords[static_cast<std::size_t>(p.observed[static_cast<std::size_t>(j)])]));
  for (int u : p.unseen)
    for (int o : p.observed)
      d_uo.push_back(euclidean(full.coords[static_cast<std::size_t>(u)], full.coords[static_cast<std::size_t>(o)]));
  if (!d_oo.empty()) {
    r.distance_divergence = wasserstein1(d_oo, d_uo);
    const double inv_s2 = 1.0 / (full.params.sigma * full.params.sigma);
    auto mean_kernel = [&](const std::vector<double>& d) {
      double s = 0.0;
      for (double x : d) s += std::exp(-x * x * inv_s2);
      return s / static_cast<double>(d.size());
    };
    r.kernel_gap = std::abs(mean_kernel(d_oo) - mean_kernel(d_uo));
  }
  r.equal_distance_populations = !d_oo.empty() && r.distance_divergence <= 1e-12;
  return r;
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["phase"] = phase_name(r.phase);
  j["mae"] = r.mae;
  j["rmse"] = r.rmse;
  j["mape"] = r.mape ? nlohmann::json(*r.mape) : nlohmann::json(nullptr);
  j["cell_count"] = r.cell_count;
  j["mape_cell_count"] = r.mape_cell_count;
  if (!r.per_step_mae.empty()) j["per_step_mae"] = r.per_step_mae;
  return j;
}

nlohmann::json to_json(const ShiftReport& r) {
  return {{"n_observed", r.n_observed},
          {"n_unseen", r.n_unseen},
          {"spectral_drift", r.spectral_drift},
          {"degree_shift", r.degree_shift},
          {"distance_divergence", r.distance_divergence},
          {"kernel_gap", r.kernel_gap},
          {"degenerate_flags",
           {{"no_cross_block_edges", r.no_cross_block_edges},
            {"equal_distance_populations", r.equal_distance_populations}}}};
}

}  // namespace krig
