#pragma once

#include "krig/geometry.hpp"

#include <string>
#include <vector>

namespace krig {

enum class GraphKind { knn_row_normalized, thresholded_gaussian };
enum class SigmaRule { explicit_value, pairwise_std };
enum class DeltaRule { explicit_value, median };

GraphKind parse_graph_kind(const std::string& text);
const char* graph_kind_name(GraphKind kind);

struct GraphBuilderParams {
  GraphKind kind = GraphKind::knn_row_normalized;
  int k = 10;
  double sigma = 1.0;  // kernel bandwidth, used when sigma_rule is explicit
  double delta = 1.0;  // radius, used when delta_rule is explicit
  SigmaRule sigma_rule = SigmaRule::pairwise_std;
  DeltaRule delta_rule = DeltaRule::median;
};

/// Population standard deviation of all pairwise distances.
double pairwise_distance_std(const Coords& coords);
double pairwise_distance_median(const Coords& coords);

/// Replaces data-driven rules by the explicit values they produce on
/// `coords`, so the result rebuilds identically on any node subset.
GraphBuilderParams resolve_params(const Coords& coords, GraphBuilderParams params);

/// Weighted directed graph. adjacency(v, u) is the weight of the edge from
/// source v to target u; message passing therefore aggregates with the
/// transpose.
struct SpatialGraph {
  std::vector<int> node_ids;  // dataset id of each row
  Coords coords;
  Matrix adjacency;
  GraphBuilderParams params;  // resolved (explicit sigma / delta)

  int size() const { return static_cast<int>(node_ids.size()); }
};

/// knn-row-normalized: A(v,u) = exp(-d^2/sigma^2) / sum over kNN(v), for u in
/// kNN(v). thresholded-gaussian: A(v,u) = exp(-d^2/sigma^2) 1{d <= delta}.
/// Both have a zero diagonal. `node_ids` defaults to 0..N-1.
SpatialGraph build_graph(const Coords& coords, const GraphBuilderParams& params,
                         std::vector<int> node_ids = {});

/// D^{-1/2} A D^{-1/2} with D the row sums of (A + A^T)/2. Zero-degree rows
/// and columns stay zero.
Matrix sym_normalize(const Matrix& adjacency);

/// Layer-scheduled edge drop over masked row/column positions. Layer 0
/// removes every outgoing edge of a masked node (and masked-masked edges);
/// later layers remove masked-masked edges only.
Matrix drop_edges(const Matrix& adjacency, const std::vector<int>& masked, int layer);

struct BlockPartition {
  std::vector<int> observed;  // row positions in the source graph
  std::vector<int> unseen;
  Matrix oo, ou, uo, uu;      // extracted blocks
  Matrix rebuilt_oo;          // build_graph on the observed coordinates alone

  /// Reassembles the blocks into the source graph's row order.
  Matrix reassemble() const;
};

/// `observed_ids` are dataset node ids present in `graph`; the unseen set is
/// the remaining nodes in graph order.
BlockPartition block_partition(const SpatialGraph& graph, const std::vector<int>& observed_ids);

/// One graph over train then validation nodes, built with `params`.
SpatialGraph union_graph(const Coords& train, const Coords& val, const GraphBuilderParams& params,
                         std::vector<int> node_ids = {});

/// Edge list CSV `src,dst,weight`, nonzero entries only, row-major.
void write_edge_list(const SpatialGraph& graph, const std::string& path);

}  // namespace krig
