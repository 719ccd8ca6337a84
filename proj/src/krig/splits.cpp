#include "krig/splits.hpp"

#include "krig/dataio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace krig {

Scheme parse_scheme(const std::string& text) {
  if (text == "3x3") return Scheme::s3x3;
  if (text == "2x3") return Scheme::s2x3;
  if (text == "2x2") return Scheme::s2x2;
  throw Error(ErrorKind::config, "unknown split scheme '" + text + "'");
}

const char* scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::s3x3: return "3x3";
    case Scheme::s2x3: return "2x3";
    case Scheme::s2x2: return "2x2";
  }
  return "unknown";
}

TemporalMode parse_temporal_mode(const std::string& text) {
  if (text == "contiguous-ratio") return TemporalMode::contiguous_ratio;
  if (text == "month-calendar") return TemporalMode::month_calendar;
  throw Error(ErrorKind::config, "unknown temporal mode '" + text + "'");
}

const char* temporal_mode_name(TemporalMode mode) {
  return mode == TemporalMode::contiguous_ratio ? "contiguous-ratio" : "month-calendar";
}

std::vector<int> SplitPlan::nodes_with(Role role) const {
  std::vector<int> out;
  for (std::size_t v = 0; v < node_roles.size(); ++v)
    if (node_roles[v] == role) out.push_back(static_cast<int>(v));
  return out;
}

std::vector<StepRange> SplitPlan::periods_with(Role role) const {
  std::vector<StepRange> out;
  const int T = static_cast<int>(period_roles.size());
  for (int t = 0; t < T;) {
    if (period_roles[static_cast<std::size_t>(t)] != role) {
      ++t;
      continue;
    }
    int b = t;
    while (t < T && period_roles[static_cast<std::size_t>(t)] == role) ++t;
    out.push_back({b, t});
  }
  return out;
}

namespace {

int floor_count(double ratio, int n) { return static_cast<int>(std::floor(ratio * n + 1e-9)); }

// Days since 1970-01-01 for a proleptic Gregorian date.
long days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

unsigned month_from_days(long z) {
  z += 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  return mp < 10 ? mp + 3 : mp - 9;
}

}  // namespace

std::vector<int> step_months(const FieldMeta& meta, int n_steps) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  require(std::sscanf(meta.start_time.c_str(), "%d-%d-%dT%d:%d", &y, &mo, &d, &h, &mi) >= 3,
          ErrorKind::config, "month-calendar split needs meta start_time YYYY-MM-DDTHH:MM");
  require(meta.interval_minutes > 0, ErrorKind::config,
          "month-calendar split needs a positive interval_minutes");
  const long start_min = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 1440L +
                         h * 60L + mi;
  std::vector<int> months(static_cast<std::size_t>(n_steps));
  for (int t = 0; t < n_steps; ++t) {
    long minutes = start_min + static_cast<long>(t) * meta.interval_minutes;
    long days = minutes >= 0 ? minutes / 1440 : -((-minutes + 1439) / 1440);
    months[static_cast<std::size_t>(t)] = static_cast<int>(month_from_days(days));
  }
  return months;
}

SplitPlan make_split(const SensorField& field, const SplitConfig& cfg) {
  const int N = field.n_nodes();
  const int T = field.n_steps();
  require(T >= 3, ErrorKind::config, "a spatio-temporal split needs at least 3 timesteps");
  SplitPlan plan;
  plan.scheme = cfg.scheme;
  plan.temporal_mode = cfg.temporal_mode;

  if (cfg.scheme == Scheme::s3x3) {
    plan.node_roles = make_missing_pattern(N, cfg.node_ratios, cfg.seed).roles;
  } else {
    // Two spatial groups: the validation share folds into test.
    require(cfg.node_ratios[0] > 0.0 && cfg.node_ratios[0] < 1.0, ErrorKind::config,
            "train node ratio must lie in (0, 1)");
    require(N >= 2, ErrorKind::config, "need at least 2 nodes");
    std::vector<int> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg.seed);
    rng.shuffle(order);
    const int n_train = floor_count(cfg.node_ratios[0], N);
    plan.node_roles.assign(static_cast<std::size_t>(N), Role::test);
    for (int i = 0; i < n_train; ++i) plan.node_roles[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = Role::train;
  }

  plan.period_roles.assign(static_cast<std::size_t>(T), Role::train);
  if (cfg.temporal_mode == TemporalMode::month_calendar) {
    const auto months = step_months(field.meta, T);
    for (int t = 0; t < T; ++t) {
      const int m = months[static_cast<std::size_t>(t)];
      Role r = Role::train;
      if (m % 3 == 0) r = Role::test;                                        // Mar Jun Sep Dec
      else if (m % 3 == 2 && cfg.scheme != Scheme::s2x2) r = Role::val;      // Feb May Aug Nov
      plan.period_roles[static_cast<std::size_t>(t)] = r;
    }
    return plan;
  }

  for (double r : cfg.period_ratios)
    require(r > 0.0, ErrorKind::config, "period ratios must be positive");
  const int t_train = floor_count(cfg.period_ratios[0], T);
  const int t_val = cfg.scheme == Scheme::s2x2 ? 0 : floor_count(cfg.period_ratios[1], T);
  require(t_train >= 1 && t_train + t_val < T, ErrorKind::config, "period ratios leave an empty period");
  for (int t = 0; t < T; ++t)
    plan.period_roles[static_cast<std::size_t>(t)] =
        t < t_train ? Role::train : (t < t_train + t_val ? Role::val : Role::test);
  return plan;
}

PhaseView phase_views(const SplitPlan& plan, Phase phase) {
  switch (phase) {
    case Phase::train: {
      CellBlock b = plan.block(Role::train, Role::train);
      return {b, b};
    }
    case Phase::validate:
      require(plan.scheme != Scheme::s2x2, ErrorKind::unsupported_phase,
              "the 2x2 scheme has no validation period");
      return {plan.block(Role::train, Role::val),
              plan.block(plan.scheme == Scheme::s3x3 ? Role::val : Role::test, Role::val)};
    case Phase::test:
      return {plan.block(Role::train, Role::test), plan.block(Role::test, Role::test)};
  }
  throw Error(ErrorKind::config, "unknown phase");
}

AuditVerdict audit_leakage(const SplitPlan& plan, const std::vector<AccessRecord>& log) {
  AuditVerdict verdict;
  const std::size_t T = plan.period_roles.size();
  std::vector<int> test_prefix(T + 1, 0);
  for (std::size_t t = 0; t < T; ++t)
    test_prefix[t + 1] = test_prefix[t] + (plan.period_roles[t] == Role::test ? 1 : 0);

  for (const AccessRecord& rec : log) {
    auto& counts = verdict.reads[static_cast<std::size_t>(rec.phase)];
    if (rec.kind == AccessKind::coordinate) {
      ++counts.coordinate_reads;
      continue;
    }
    counts.value_cells += static_cast<std::size_t>(rec.steps.length());
    if (rec.phase == Phase::test) continue;
    const Role node_role = plan.node_roles[static_cast<std::size_t>(rec.node)];
    const int test_steps = test_prefix[static_cast<std::size_t>(rec.steps.end)] -
                           test_prefix[static_cast<std::size_t>(rec.steps.begin)];
    const char* why = nullptr;
    if (node_role == Role::test) why = "test-node value";
    else if (test_steps > 0) why = "test-period value";
    else if (rec.phase == Phase::train && node_role == Role::val) why = "validation-node value";
    if (!why) continue;
    verdict.pass = false;
    ++verdict.violation_count;
    if (verdict.violations.size() < 16) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s read during %s: node %d steps [%d,%d)", why,
                    phase_name(rec.phase), rec.node, rec.steps.begin, rec.steps.end);
      verdict.violations.emplace_back(buf);
    }
  }
  return verdict;
}

void write_split(const SplitPlan& plan, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path);
  out << "# krigbench split v1\n";
  out << "scheme," << scheme_name(plan.scheme) << "\n";
  out << "temporal_mode," << temporal_mode_name(plan.temporal_mode) << "\n";
  out << "n_nodes," << plan.node_roles.size() << "\n";
  out << "n_steps," << plan.period_roles.size() << "\n";
  out << "[nodes]\n";
  for (std::size_t v = 0; v < plan.node_roles.size(); ++v)
    out << role_name(plan.node_roles[v]) << ',' << v << '\n';
  out << "[periods]\n";
  const int T = static_cast<int>(plan.period_roles.size());
  for (int t = 0; t < T;) {
    Role r = plan.period_roles[static_cast<std::size_t>(t)];
    int b = t;
    while (t < T && plan.period_roles[static_cast<std::size_t>(t)] == r) ++t;
    out << role_name(r) << ',' << b << ',' << t << '\n';
  }
}

SplitPlan read_split(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open split file " + path);
  SplitPlan plan;
  std::string line, section;
  int lineno = 0;
  long n_nodes = -1, n_steps = -1;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::parse, path + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line[0] == '[') {
      section = line;
      if (section == "[nodes]") plan.node_roles.assign(static_cast<std::size_t>(std::max(n_nodes, 0L)), Role::test);
      if (section == "[periods]") plan.period_roles.assign(static_cast<std::size_t>(std::max(n_steps, 0L)), Role::train);
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    try {
      if (section.empty()) {
        if (cells.size() != 2) fail("expected key,value");
        if (cells[0] == "scheme") plan.scheme = parse_scheme(cells[1]);
        else if (cells[0] == "temporal_mode") plan.temporal_mode = parse_temporal_mode(cells[1]);
        else if (cells[0] == "n_nodes") n_nodes = std::stol(cells[1]);
        else if (cells[0] == "n_steps") n_steps = std::stol(cells[1]);
        else fail("unknown key " + cells[0]);
      } else if (section == "[nodes]") {
        if (cells.size() != 2) fail("expected role,node_id");
        long v = std::stol(cells[1]);
        if (v < 0 || v >= n_nodes) fail("node id out of range");
        plan.node_roles[static_cast<std::size_t>(v)] = parse_role(cells[0]);
      } else if (section == "[periods]") {
        if (cells.size() != 3) fail("expected role,step_start,step_end");
        long b = std::stol(cells[1]), e = std::stol(cells[2]);
        if (b < 0 || e > n_steps || b > e) fail("step range out of bounds");
        for (long t = b; t < e; ++t) plan.period_roles[static_cast<std::size_t>(t)] = parse_role(cells[0]);
      } else {
        fail("unknown section " + section);
      }
    } catch (const std::logic_error&) {
      fail("malformed number");
    }
  }
  require(n_nodes >= 0 && n_steps >= 0, ErrorKind::parse, path + ": missing n_nodes/n_steps header");
  return plan;
}

}  // namespace krig
