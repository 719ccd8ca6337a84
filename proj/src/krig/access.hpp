#pragma once

#include "krig/field.hpp"

#include <mutex>
#include <vector>

namespace krig {

enum class AccessKind { value, coordinate };

struct AccessRecord {
  Phase phase;
  AccessKind kind;
  int node;
  StepRange steps;  // empty for coordinate reads
};

/// Append-only record of every field read made through a FieldReader.
/// Reads are logged as (node, contiguous step range) spans so a full
/// training run stays small.
class AccessLog {
 public:
  void record(const AccessRecord& rec);
  std::vector<AccessRecord> records() const;
  std::size_t size() const;
  void clear();

 private:
  mutable std::mutex mutex_;
  std::vector<AccessRecord> records_;
};

/// Instrumented read-only view over a SensorField. Every value or
/// coordinate read is tagged with the reader's phase and appended to the
/// log, when one is attached.
class FieldReader {
 public:
  FieldReader(const SensorField& field, AccessLog* log, Phase phase)
      : field_(&field), log_(log), phase_(phase) {}

  FieldReader with_phase(Phase phase) const { return {*field_, log_, phase}; }

  int n_nodes() const { return field_->n_nodes(); }
  int n_steps() const { return field_->n_steps(); }
  Phase phase() const { return phase_; }
  const FieldMeta& meta() const { return field_->meta; }

  /// Copies node values over `range` into `values`, and the mask into
  /// `observed` when non-null. Both must hold range.length() entries.
  void read(int node, StepRange range, double* values, bool* observed) const;
  double value(int node, int step) const;
  bool observed(int node, int step) const;
  Point coord(int node) const;
  Coords coords(const std::vector<int>& nodes) const;

 private:
  void log(AccessKind kind, int node, StepRange steps) const;

  const SensorField* field_;
  AccessLog* log_;
  Phase phase_;
};

/// Values of `nodes` over `periods`, columns concatenated in period order.
/// Unobserved cells hold NaN.
struct BlockValues {
  Matrix values;
  BoolMatrix observed;
};

BlockValues read_block(const FieldReader& reader, const std::vector<int>& nodes,
                       const std::vector<StepRange>& periods);

}  // namespace krig
