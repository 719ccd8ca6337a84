#include "helpers.hpp"

#include "krig/splits.hpp"

#include <doctest.h>

#include <fstream>
#include <set>

using namespace krig;

namespace {

AccessRecord value_read(Phase ph, int node, int b, int e) {
  return {ph, AccessKind::value, node, {b, e}};
}

}  // namespace

TEST_SUITE("splits") {

TEST_CASE("3x3 split of 10 nodes and 100 steps") {
  const auto f = testutil::random_field(10, 100, 1);
  const auto plan = make_split(f, SplitConfig{});
  CHECK(plan.nodes_with(Role::train).size() == 6);
  CHECK(plan.nodes_with(Role::val).size() == 2);
  CHECK(plan.nodes_with(Role::test).size() == 2);
  CHECK(plan.periods_with(Role::train) == std::vector<StepRange>{{0, 70}});
  CHECK(plan.periods_with(Role::val) == std::vector<StepRange>{{70, 80}});
  CHECK(plan.periods_with(Role::test) == std::vector<StepRange>{{80, 100}});
}

TEST_CASE("two-group schemes fold validation nodes into test") {
  const auto f = testutil::random_field(10, 100, 1);
  SplitConfig cfg;
  cfg.scheme = Scheme::s2x3;
  const auto p23 = make_split(f, cfg);
  CHECK(p23.nodes_with(Role::val).empty());
  CHECK(p23.nodes_with(Role::train).size() == 6);
  CHECK(total_steps(p23.periods_with(Role::val)) == 10);
  cfg.scheme = Scheme::s2x2;
  const auto p22 = make_split(f, cfg);
  CHECK(p22.periods_with(Role::val).empty());
  CHECK(p22.periods_with(Role::train) == std::vector<StepRange>{{0, 70}});
  CHECK_THROWS_AS(phase_views(p22, Phase::validate), Error);
  try {
    phase_views(p22, Phase::validate);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unsupported_phase);
  }
}

TEST_CASE("roles partition nodes and steps for every scheme and seed") {
  for (Scheme s : {Scheme::s3x3, Scheme::s2x3, Scheme::s2x2})
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const auto f = testutil::random_field(17, 53, seed);
      SplitConfig cfg;
      cfg.scheme = s;
      cfg.seed = seed;
      const auto plan = make_split(f, cfg);
      std::set<int> nodes;
      for (Role r : {Role::train, Role::val, Role::test})
        for (int v : plan.nodes_with(r)) CHECK(nodes.insert(v).second);
      CHECK(nodes.size() == 17);
      int steps = 0;
      for (Role r : {Role::train, Role::val, Role::test}) steps += total_steps(plan.periods_with(r));
      CHECK(steps == 53);
      CHECK(make_split(f, cfg) == plan);
    }
}

TEST_CASE("phase views pair the right node and period groups") {
  const auto f = testutil::random_field(10, 100, 2);
  const auto plan = make_split(f, SplitConfig{});
  const auto tr = phase_views(plan, Phase::train);
  CHECK(tr.inputs.nodes == plan.nodes_with(Role::train));
  const auto va = phase_views(plan, Phase::validate);
  CHECK(va.targets.nodes == plan.nodes_with(Role::val));
  CHECK(va.inputs.periods == plan.periods_with(Role::val));
  const auto te = phase_views(plan, Phase::test);
  CHECK(te.inputs.nodes == plan.nodes_with(Role::train));
  CHECK(te.targets.nodes == plan.nodes_with(Role::test));
  CHECK(te.targets.periods == plan.periods_with(Role::test));
  SplitConfig c23;
  c23.scheme = Scheme::s2x3;
  const auto p23 = make_split(f, c23);
  CHECK(phase_views(p23, Phase::validate).targets.nodes == p23.nodes_with(Role::test));
}

TEST_CASE("too short series are rejected") {
  const auto f = testutil::random_field(5, 2, 1);
  CHECK_THROWS_AS(make_split(f, SplitConfig{}), Error);
}

TEST_CASE("audit flags each forbidden read and allows coordinates") {
  const auto f = testutil::random_field(10, 100, 3);
  const auto plan = make_split(f, SplitConfig{});
  const int tr = plan.nodes_with(Role::train)[0];
  const int va = plan.nodes_with(Role::val)[0];
  const int te = plan.nodes_with(Role::test)[0];

  CHECK(audit_leakage(plan, {value_read(Phase::train, tr, 0, 70)}).pass);
  CHECK(audit_leakage(plan, {value_read(Phase::validate, tr, 70, 80),
                             value_read(Phase::validate, va, 70, 80)}).pass);
  CHECK(audit_leakage(plan, {value_read(Phase::test, te, 80, 100)}).pass);
  CHECK(audit_leakage(plan, {{Phase::train, AccessKind::coordinate, te, {}}}).pass);

  CHECK_FALSE(audit_leakage(plan, {value_read(Phase::train, te, 0, 10)}).pass);
  CHECK_FALSE(audit_leakage(plan, {value_read(Phase::train, tr, 60, 81)}).pass);
  CHECK_FALSE(audit_leakage(plan, {value_read(Phase::train, va, 0, 70)}).pass);
  CHECK_FALSE(audit_leakage(plan, {value_read(Phase::validate, te, 70, 80)}).pass);
  CHECK_FALSE(audit_leakage(plan, {value_read(Phase::validate, tr, 79, 81)}).pass);

  const auto v = audit_leakage(plan, {value_read(Phase::train, tr, 0, 70), value_read(Phase::train, te, 5, 6),
                                      value_read(Phase::test, te, 80, 90)});
  CHECK(v.violation_count == 1);
  CHECK(v.reads[0].value_cells == 71);
  CHECK(v.reads[2].value_cells == 10);
  REQUIRE(v.violations.size() == 1);
  CHECK(v.violations[0].find("test-node") != std::string::npos);
}

TEST_CASE("reader logs every read with its phase") {
  const auto f = testutil::random_field(4, 10, 4);
  AccessLog log;
  FieldReader r(f, &log, Phase::train);
  double buf[3];
  bool obs[3];
  r.read(1, {2, 5}, buf, obs);
  CHECK(buf[0] == f.values(1, 2));
  r.with_phase(Phase::test).value(3, 9);
  r.coord(0);
  const auto recs = log.records();
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].steps == StepRange{2, 5});
  CHECK(recs[1].phase == Phase::test);
  CHECK(recs[2].kind == AccessKind::coordinate);
  const auto blk = read_block(r, {0, 2}, {{0, 2}, {7, 9}});
  CHECK(blk.values.cols() == 4);
  CHECK(blk.values(1, 2) == f.values(2, 7));
}

TEST_CASE("split file round trips and reports bad lines") {
  const auto f = testutil::random_field(9, 40, 5);
  SplitConfig cfg;
  cfg.scheme = Scheme::s2x3;
  const auto plan = make_split(f, cfg);
  const auto dir = testutil::temp_dir("splits_io");
  const auto path = (dir / "split.txt").string();
  write_split(plan, path);
  CHECK(read_split(path) == plan);

  std::ofstream(dir / "bad.txt") << "# krigbench split v1\nscheme,3x3\nn_nodes,2\nn_steps,4\n[nodes]\ntrain,7\n";
  try {
    read_split((dir / "bad.txt").string());
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse);
    CHECK(std::string(e.what()).find(":6:") != std::string::npos);
  }
}

TEST_CASE("month calendar assigns quarter-end months to test") {
  FieldMeta meta;
  meta.start_time = "2021-01-31T12:00";
  meta.interval_minutes = 720;
  const auto months = step_months(meta, 4);
  CHECK(months == std::vector<int>{1, 2, 2, 2});
  meta.start_time = "2020-02-28T00:00";
  meta.interval_minutes = 1440;
  CHECK(step_months(meta, 3) == std::vector<int>{2, 2, 3});  // leap year

  auto f = testutil::random_field(6, 366 * 24, 6);  // 2020 hourly
  SplitConfig cfg;
  cfg.temporal_mode = TemporalMode::month_calendar;
  const auto plan = make_split(f, cfg);
  const auto m = step_months(f.meta, f.n_steps());
  for (int t = 0; t < f.n_steps(); t += 97) {
    const Role want = m[t] % 3 == 0 ? Role::test : (m[t] % 3 == 2 ? Role::val : Role::train);
    CHECK(plan.period_roles[t] == want);
  }
  CHECK(plan.periods_with(Role::test).size() == 4);
  cfg.scheme = Scheme::s2x2;
  CHECK(make_split(f, cfg).periods_with(Role::val).empty());
  f.meta.start_time.clear();
  cfg.scheme = Scheme::s3x3;
  CHECK_THROWS_AS(make_split(f, cfg), Error);
}

}  // TEST_SUITE
