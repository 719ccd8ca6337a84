#pragma once

#include "krig/access.hpp"
#include "krig/field.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace krig {

enum class FieldFormat { csv_wide, packed_binary };
FieldFormat parse_field_format(const std::string& text);
const char* field_format_name(FieldFormat format);

/// Path of the coordinate sidecar for a dataset file: "<stem>.coords.csv".
std::string coords_sidecar_path(const std::string& path);
/// Optional metadata sidecar: "<stem>.meta.json".
std::string meta_sidecar_path(const std::string& path);

/// Reads a dataset and its coordinate sidecar. csv-wide: header
/// `node_0..node_{N-1}`, one row per timestep, empty or "NaN" cells are
/// missing. packed-binary: "KRGF", u32 version, u32 N, u32 T, f64 values
/// node-major, then N*T mask bytes.
SensorField load_field(const std::string& path, FieldFormat format);
void save_field(const SensorField& field, const std::string& path, FieldFormat format);

enum class NormalizerKind { per_node_capacity, global_z_score };
NormalizerKind parse_normalizer_kind(const std::string& text);
const char* normalizer_kind_name(NormalizerKind kind);

/// Affine per-node map x -> (x - offset[v]) / scale[v].
struct Normalizer {
  NormalizerKind kind = NormalizerKind::global_z_score;
  std::vector<double> offset;
  std::vector<double> scale;

  double forward(int node, double x) const { return (x - offset[node]) / scale[node]; }
  double inverse(int node, double y) const { return y * scale[node] + offset[node]; }
  /// Whole-matrix variants over an N x T matrix (row = node).
  Matrix forward(const Matrix& values) const;
  Matrix inverse(const Matrix& values) const;
};

/// Fits on the observed cells of `fit_cells` only. For per-node capacity
/// scaling no cell is read; only the capacity metadata.
Normalizer fit_normalizer(const FieldReader& reader, const CellBlock& fit_cells,
                          NormalizerKind kind);

struct NodeAssignment {
  std::vector<Role> roles;   // per node
  std::vector<int> order;    // shuffled node order the roles were cut from
  std::array<int, 3> sizes;  // train, val, test
};

/// Seeded shuffle of node ids, cut into floor(r_train*N) train, floor(r_val*N)
/// validation and the remainder test.
NodeAssignment make_missing_pattern(int n_nodes, std::array<double, 3> ratios,
                                    std::uint64_t seed);

/// Squared-exponential kernel exp(-d^2 / length_scale^2) over all pairs.
Matrix se_kernel_matrix(const Coords& a, const Coords& b, double length_scale);

struct SynthParams {
  int n_nodes = 60;
  int n_steps = 2000;
  double length_scale = 0.3;
  double temporal_rho = 0.9;
  double noise_std = 0.05;
  std::uint64_t seed = 42;
};

/// Coordinates uniform in the unit square; each column a draw of a zero-mean
/// GP with the squared-exponential kernel, evolved by a stationary AR(1)
/// recursion f_t = rho f_{t-1} + sqrt(1 - rho^2) z_t, plus white noise.
SensorField synth_gp_field(const SynthParams& params);

}  // namespace krig
