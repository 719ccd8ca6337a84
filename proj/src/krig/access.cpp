#include "krig/access.hpp"

#include <algorithm>
#include <limits>
#include <memory>

namespace krig {

const char* role_name(Role role) {
  switch (role) {
    case Role::train: return "train";
    case Role::val: return "val";
    case Role::test: return "test";
  }
  return "unknown";
}

Role parse_role(const std::string& text) {
  if (text == "train") return Role::train;
  if (text == "val") return Role::val;
  if (text == "test") return Role::test;
  throw Error(ErrorKind::parse, "unknown role '" + text + "'");
}

int total_steps(const std::vector<StepRange>& ranges) {
  int n = 0;
  for (const auto& r : ranges) n += r.length();
  return n;
}

bool CellBlock::contains(int node, int step) const {
  if (std::find(nodes.begin(), nodes.end(), node) == nodes.end()) return false;
  return std::any_of(periods.begin(), periods.end(),
                     [step](const StepRange& r) { return r.contains(step); });
}

void SensorField::validate() const {
  require(values.rows() == mask.rows() && values.cols() == mask.cols(), ErrorKind::shape,
          "values and mask shapes differ");
  require(static_cast<Eigen::Index>(coords.size()) == values.rows(), ErrorKind::shape,
          "coordinate count " + std::to_string(coords.size()) + " does not match node count " +
              std::to_string(values.rows()));
  if (meta.capacity) {
    require(static_cast<Eigen::Index>(meta.capacity->size()) == values.rows(), ErrorKind::shape,
            "capacity count does not match node count");
    for (double c : *meta.capacity)
      require(c > 0.0, ErrorKind::config, "capacity must be strictly positive");
  }
}

void AccessLog::record(const AccessRecord& rec) {
  std::lock_guard lock(mutex_);
  records_.push_back(rec);
}

std::vector<AccessRecord> AccessLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t AccessLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

void AccessLog::clear() {
  std::lock_guard lock(mutex_);
  records_.clear();
}

void FieldReader::log(AccessKind kind, int node, StepRange steps) const {
  if (log_) log_->record({phase_, kind, node, steps});
}

void FieldReader::read(int node, StepRange range, double* values, bool* observed) const {
  require(node >= 0 && node < n_nodes() && range.begin >= 0 && range.end <= n_steps() &&
              range.begin <= range.end,
          ErrorKind::shape, "field read out of range");
  log(AccessKind::value, node, range);
  for (int t = range.begin; t < range.end; ++t) {
    values[t - range.begin] = field_->values(node, t);
    if (observed) observed[t - range.begin] = field_->mask(node, t);
  }
}

double FieldReader::value(int node, int step) const {
  double v;
  read(node, {step, step + 1}, &v, nullptr);
  return v;
}

bool FieldReader::observed(int node, int step) const {
  double v;
  bool m;
  read(node, {step, step + 1}, &v, &m);
  return m;
}

Point FieldReader::coord(int node) const {
  require(node >= 0 && node < n_nodes(), ErrorKind::shape, "coordinate read out of range");
  log(AccessKind::coordinate, node, {});
  return field_->coords[static_cast<std::size_t>(node)];
}

Coords FieldReader::coords(const std::vector<int>& nodes) const {
  Coords out;
  out.reserve(nodes.size());
  for (int v : nodes) out.push_back(coord(v));
  return out;
}

BlockValues read_block(const FieldReader& reader, const std::vector<int>& nodes,
                       const std::vector<StepRange>& periods) {
  const int steps = total_steps(periods);
  BlockValues out{Matrix(static_cast<Eigen::Index>(nodes.size()), steps),
                  BoolMatrix(static_cast<Eigen::Index>(nodes.size()), steps)};
  std::vector<double> v;
  std::unique_ptr<bool[]> m(new bool[static_cast<std::size_t>(std::max(steps, 1))]);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    int col = 0;
    for (const StepRange& r : periods) {
      v.resize(static_cast<std::size_t>(r.length()));
      reader.read(nodes[i], r, v.data(), m.get());
      for (int t = 0; t < r.length(); ++t, ++col) {
        const auto ii = static_cast<Eigen::Index>(i);
        out.observed(ii, col) = m[static_cast<std::size_t>(t)];
        out.values(ii, col) = m[static_cast<std::size_t>(t)] ? v[static_cast<std::size_t>(t)]
                                                              : std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return out;
}

}  // namespace krig
