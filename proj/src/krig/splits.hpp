#pragma once

#include "krig/access.hpp"
#include "krig/field.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace krig {

enum class Scheme { s3x3, s2x3, s2x2 };
enum class TemporalMode { contiguous_ratio, month_calendar };

Scheme parse_scheme(const std::string& text);
const char* scheme_name(Scheme scheme);
TemporalMode parse_temporal_mode(const std::string& text);
const char* temporal_mode_name(TemporalMode mode);

/// Assignment of every node and every timestep to a role. Under 2x2 and
/// 2x3 no node is a validation node; under 2x2 no step is a validation step.
struct SplitPlan {
  Scheme scheme = Scheme::s3x3;
  TemporalMode temporal_mode = TemporalMode::contiguous_ratio;
  std::vector<Role> node_roles;
  std::vector<Role> period_roles;

  std::vector<int> nodes_with(Role role) const;
  /// Maximal runs of consecutive steps with `role`, in time order.
  std::vector<StepRange> periods_with(Role role) const;
  CellBlock block(Role node_role, Role period_role) const {
    return {nodes_with(node_role), periods_with(period_role)};
  }

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

struct SplitConfig {
  Scheme scheme = Scheme::s3x3;
  std::array<double, 3> node_ratios{0.6, 0.2, 0.2};
  std::array<double, 3> period_ratios{0.7, 0.1, 0.2};
  std::uint64_t seed = 42;
  TemporalMode temporal_mode = TemporalMode::contiguous_ratio;
};

/// Contiguous-ratio mode cuts periods chronologically train -> val -> test;
/// month-calendar mode puts Mar/Jun/Sep/Dec in test and Feb/May/Aug/Nov in
/// validation. Node roles come from make_missing_pattern(seed).
SplitPlan make_split(const SensorField& field, const SplitConfig& config);

/// Month (1..12) of every step, from meta.start_time and interval_minutes.
std::vector<int> step_months(const FieldMeta& meta, int n_steps);

struct PhaseView {
  CellBlock inputs;
  CellBlock targets;
};

/// train: inputs = targets = train nodes x train period. validate: train
/// nodes x val period -> val nodes (test nodes under 2x3) x val period.
/// test: train nodes x test period -> test nodes x test period.
PhaseView phase_views(const SplitPlan& plan, Phase phase);

struct PhaseReadCounts {
  std::size_t value_cells = 0;
  std::size_t coordinate_reads = 0;
};

struct AuditVerdict {
  bool pass = true;
  std::array<PhaseReadCounts, 3> reads{};  // indexed by Phase
  std::size_t violation_count = 0;
  std::vector<std::string> violations;     // first few, human readable
};

/// FAIL iff a test cell (test node or test step) was read during training
/// or validation, or a validation-node value was read during training.
/// Coordinate reads are always permitted.
AuditVerdict audit_leakage(const SplitPlan& plan, const std::vector<AccessRecord>& log);

void write_split(const SplitPlan& plan, const std::string& path);
SplitPlan read_split(const std::string& path);

}  // namespace krig
