#include "krig/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace krig {

GraphKind parse_graph_kind(const std::string& text) {
  if (text == "knn-row-normalized") return GraphKind::knn_row_normalized;
  if (text == "thresholded-gaussian") return GraphKind::thresholded_gaussian;
  throw Error(ErrorKind::config, "unknown graph kind '" + text + "'");
}

const char* graph_kind_name(GraphKind kind) {
  return kind == GraphKind::knn_row_normalized ? "knn-row-normalized" : "thresholded-gaussian";
}

double pairwise_distance_std(const Coords& coords) {
  const auto d = pairwise_distance_list(coords);
  if (d.empty()) return 0.0;
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(d.size()));
}

double pairwise_distance_median(const Coords& coords) {
  auto d = pairwise_distance_list(coords);
  if (d.empty()) return 0.0;
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  return n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
}

GraphBuilderParams resolve_params(const Coords& coords, GraphBuilderParams params) {
  if (params.sigma_rule == SigmaRule::pairwise_std) {
    params.sigma = pairwise_distance_std(coords);
    params.sigma_rule = SigmaRule::explicit_value;
  }
  if (params.delta_rule == DeltaRule::median) {
    params.delta = pairwise_distance_median(coords);
    params.delta_rule = DeltaRule::explicit_value;
  }
  return params;
}

SpatialGraph build_graph(const Coords& coords, const GraphBuilderParams& raw,
                         std::vector<int> node_ids) {
  const int n = static_cast<int>(coords.size());
  require(n >= 2, ErrorKind::config, "a graph needs at least 2 nodes");
  if (node_ids.empty()) {
    node_ids.resize(coords.size());
    std::iota(node_ids.begin(), node_ids.end(), 0);
  }
  require(node_ids.size() == coords.size(), ErrorKind::shape, "node id count != coordinate count");
  SpatialGraph g;
  g.params = resolve_params(coords, raw);
  require(g.params.sigma > 0.0, ErrorKind::config, "graph bandwidth sigma must be positive");
  g.node_ids = std::move(node_ids);
  g.coords = coords;
  g.adjacency = Matrix::Zero(n, n);
  const double inv_s2 = 1.0 / (g.params.sigma * g.params.sigma);
  const Matrix D = pairwise_distances(coords);

  if (g.params.kind == GraphKind::thresholded_gaussian) {
    require(g.params.delta > 0.0, ErrorKind::config, "graph radius delta must be positive");
    for (int v = 0; v < n; ++v)
      for (int u = 0; u < n; ++u)
        if (u != v && D(v, u) <= g.params.delta) g.adjacency(v, u) = std::exp(-D(v, u) * D(v, u) * inv_s2);
    return g;
  }

  const auto nbrs = knn(coords, g.params.k);
  for (int v = 0; v < n; ++v) {
    const auto& nv = nbrs[static_cast<std::size_t>(v)];
    double denom = 0.0;
    for (int u : nv) denom += std::exp(-D(v, u) * D(v, u) * inv_s2);
    if (denom <= 0.0) continue;  // all weights underflowed: isolated row
    for (int u : nv) g.adjacency(v, u) = std::exp(-D(v, u) * D(v, u) * inv_s2) / denom;
  }
  return g;
}

Matrix sym_normalize(const Matrix& A) {
  const Vector deg = 0.5 * (A.rowwise().sum() + A.colwise().sum().transpose());
  Vector inv_sqrt(deg.size());
  for (Eigen::Index i = 0; i < deg.size(); ++i)
    inv_sqrt(i) = deg(i) > 0.0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
  return inv_sqrt.asDiagonal() * A * inv_sqrt.asDiagonal();
}

Matrix drop_edges(const Matrix& A, const std::vector<int>& masked, int layer) {
  Matrix out = A;
  if (layer == 0) {
    // Zeroing the masked rows already covers the masked-masked entries.
    for (int v : masked) out.row(v).setZero();
    return out;
  }
  for (int v : masked)
    for (int u : masked) out(v, u) = 0.0;
  return out;
}

Matrix BlockPartition::reassemble() const {
  const auto no = static_cast<Eigen::Index>(observed.size());
  const auto nu = static_cast<Eigen::Index>(unseen.size());
  Matrix A = Matrix::Zero(no + nu, no + nu);
  for (Eigen::Index i = 0; i < no; ++i) {
    for (Eigen::Index j = 0; j < no; ++j) A(observed[i], observed[j]) = oo(i, j);
    for (Eigen::Index j = 0; j < nu; ++j) A(observed[i], unseen[j]) = ou(i, j);
  }
  for (Eigen::Index i = 0; i < nu; ++i) {
    for (Eigen::Index j = 0; j < no; ++j) A(unseen[i], observed[j]) = uo(i, j);
    for (Eigen::Index j = 0; j < nu; ++j) A(unseen[i], unseen[j]) = uu(i, j);
  }
  return A;
}

BlockPartition block_partition(const SpatialGraph& g, const std::vector<int>& observed_ids) {
  BlockPartition p;
  std::vector<char> is_obs(static_cast<std::size_t>(g.size()), 0);
  for (int id : observed_ids) {
    auto it = std::find(g.node_ids.begin(), g.node_ids.end(), id);
    require(it != g.node_ids.end(), ErrorKind::config,
            "observed node " + std::to_string(id) + " is not in the graph");
    int pos = static_cast<int>(it - g.node_ids.begin());
    p.observed.push_back(pos);
    is_obs[static_cast<std::size_t>(pos)] = 1;
  }
  for (int pos = 0; pos < g.size(); ++pos)
    if (!is_obs[static_cast<std::size_t>(pos)]) p.unseen.push_back(pos);

  auto extract = [&](const std::vector<int>& rows, const std::vector<int>& cols) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < cols.size(); ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g.adjacency(rows[i], cols[j]);
    return m;
  };
  p.oo = extract(p.observed, p.observed);
  p.ou = extract(p.observed, p.unseen);
  p.uo = extract(p.unseen, p.observed);
  p.uu = extract(p.unseen, p.unseen);

  if (p.observed.size() >= 2) {
    Coords obs;
    for (int pos : p.observed) obs.push_back(g.coords[static_cast<std::size_t>(pos)]);
    GraphBuilderParams params = g.params;
    if (params.kind == GraphKind::knn_row_normalized)
      params.k = std::min(params.k, static_cast<int>(obs.size()) - 1);
    p.rebuilt_oo = build_graph(obs, params).adjacency;
  } else {
    p.rebuilt_oo = Matrix::Zero(static_cast<Eigen::Index>(p.observed.size()),
                                static_cast<Eigen::Index>(p.observed.size()));
  }
  return p;
}

SpatialGraph union_graph(const Coords& train, const Coords& val, const GraphBuilderParams& params,
                         std::vector<int> node_ids) {
  Coords all = train;
  all.insert(all.end(), val.begin(), val.end());
  return build_graph(all, params, std::move(node_ids));
}

void write_edge_list(const SpatialGraph& g, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path);
  out << "src,dst,weight\n";
  char buf[96];
  for (int v = 0; v < g.size(); ++v)
    for (int u = 0; u < g.size(); ++u)
      if (g.adjacency(v, u) != 0.0) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", g.node_ids[static_cast<std::size_t>(v)],
                      g.node_ids[static_cast<std::size_t>(u)], g.adjacency(v, u));
        out << buf;
      }
}

}  // namespace krig
