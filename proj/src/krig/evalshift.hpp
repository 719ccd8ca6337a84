#pragma once

#include "krig/graph.hpp"

#include <json.hpp>

#include <optional>
#include <vector>

namespace krig {

struct MetricReport {
  Phase phase = Phase::test;
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> mape;  // percent; absent when no cell clears mape_floor
  std::size_t cell_count = 0;
  std::size_t mape_cell_count = 0;
  std::vector<double> per_step_mae;  // filled on request, one per column
};

/// Scores the cells where `cells` is true. MAPE uses only cells with
/// |truth| > mape_floor. Throws ErrorKind::config on an empty cell set or a
/// NaN prediction inside it.
MetricReport score(const Matrix& pred, const Matrix& truth, const BoolMatrix& cells, Phase phase,
                   double mape_floor = 1e-4, bool per_step = false);
MetricReport score(const Vector& pred, const Vector& truth, Phase phase, double mape_floor = 1e-4);

/// test.mae / val.mae. Throws ErrorKind::undefined_ratio when val.mae is 0.
double generalization_ratio(const MetricReport& test, const MetricReport& val);

struct ShiftReport {
  int n_observed = 0;
  int n_unseen = 0;
  double spectral_drift = 0.0;
  std::vector<double> degree_shift;  // per observed node, graph order
  double distance_divergence = 0.0;
  double kernel_gap = 0.0;
  bool no_cross_block_edges = false;       // degenerate case 1
  bool equal_distance_populations = false;  // stand-in for degenerate case 3
};

/// Compares the observed block of the normalized full graph with the
/// normalized observed-only rebuild, and the O-O against U-O distance laws.
ShiftReport shift_report(const SpatialGraph& full, const std::vector<int>& observed_ids);

/// Sorted eigenvalues of the symmetric part (M + M^T) / 2.
Vector sorted_spectrum(const Matrix& M);

/// Exact 1-Wasserstein distance between two empirical samples.
double wasserstein1(std::vector<double> a, std::vector<double> b);

nlohmann::json to_json(const MetricReport& report);
nlohmann::json to_json(const ShiftReport& report);

}  // namespace krig
