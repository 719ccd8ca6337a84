#pragma once

#include "krig/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace krig {

/// Role of a node or a timestep under a spatio-temporal split.
enum class Role : std::uint8_t { train, val, test };
const char* role_name(Role role);
Role parse_role(const std::string& text);

struct FieldMeta {
  std::string name;
  /// Per-node rated capacity, sensor units. Present only for datasets that
  /// carry it (e.g. PV plants).
  std::optional<std::vector<double>> capacity;
  /// ISO-8601 timestamp of step 0, "YYYY-MM-DDTHH:MM". Needed only for
  /// calendar-based temporal splits.
  std::string start_time;
  int interval_minutes = 0;
};

/// Node coordinates plus an N x T value matrix with an availability mask.
struct SensorField {
  Coords coords;
  Matrix values;     // N x T
  BoolMatrix mask;   // N x T, true = observed
  FieldMeta meta;

  int n_nodes() const { return static_cast<int>(values.rows()); }
  int n_steps() const { return static_cast<int>(values.cols()); }

  /// Throws ErrorKind::shape / config when invariants are broken.
  void validate() const;
};

/// Half-open step interval [begin, end).
struct StepRange {
  int begin = 0;
  int end = 0;

  int length() const { return end - begin; }
  bool contains(int step) const { return step >= begin && step < end; }
  friend bool operator==(const StepRange&, const StepRange&) = default;
};

int total_steps(const std::vector<StepRange>& ranges);

/// Cartesian block of cells: every listed node at every step in `periods`.
struct CellBlock {
  std::vector<int> nodes;
  std::vector<StepRange> periods;

  std::size_t cell_count() const {
    return nodes.size() * static_cast<std::size_t>(total_steps(periods));
  }
  bool contains(int node, int step) const;
};

}  // namespace krig
