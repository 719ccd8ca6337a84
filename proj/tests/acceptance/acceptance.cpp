// Acceptance checks, one PASS/FAIL line per criterion.
// usage: krig_acceptance <work_dir> <desk_config.json>
#include "krig/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace krig;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kGradSeconds = 30.0;
constexpr double kKrigTol = 1e-8;
constexpr int kDomainSamples = 100000;
constexpr double kQuadrantTol = 0.01;
constexpr double kShiftTol = 1e-10;
constexpr double kE2eSeconds = 20 * 60.0;
constexpr double kRmseTol = 1e-4;
const std::vector<std::uint64_t> kSeeds = {42, 3407, 1202};

int g_failures = 0;

void report(int id, bool pass, const std::string& what) {
  std::printf("%s %d %s\n", pass ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Coords random_coords(int n, Rng& rng) {
  Coords c(static_cast<std::size_t>(n));
  for (auto& p : c) p = {rng.uniform(), rng.uniform()};
  return c;
}

Matrix random_matrix(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1 ------------------------------------------------------------------------
void gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  Rng rng(101);
  for (int inst = 0; inst < 5; ++inst) {
    const int n_train = 4, n_val = 2, T = 8;
    TrainingData d;
    for (int i = 0; i < n_train; ++i) d.train_ids.push_back(i);
    for (int j = 0; j < n_val; ++j) d.val_ids.push_back(n_train + j);
    d.train_coords = random_coords(n_train, rng);
    d.val_coords = random_coords(n_val, rng);
    d.values = random_matrix(n_train, T, rng);
    d.observed = BoolMatrix::Constant(n_train, T, true);
    d.runs = {{0, T}};

    DrikConfig cfg;
    cfg.graph.k = 3;
    DrikState st = make_drik_state(d, cfg);
    const Matrix A = perturb_and_rebuild(st.domains, st.base_graph.params, rng).adjacency;
    const PassPlan plan = sample_pass_plan(n_train, cfg.mask_fraction, true, rng);

    ModelConfig mc;
    mc.n_layers = 2;
    mc.hidden_dim = 6;
    mc.window_size = 4;
    StgcModel model(mc);
    model.init(rng);
    for (const auto& s : model.slots())
      if (s.rows == 1)
        for (std::size_t i = 0; i < s.size(); ++i) model.mutable_params()(s.offset + i) = 0.1 * rng.normal();

    const std::vector<StepRange> windows = inst % 2 ? std::vector<StepRange>{{0, 8}}
                                                    : std::vector<StepRange>{{0, 4}, {4, 8}};
    const DrikLoss base = drik_loss(model, d, windows, A, plan, cfg, true);
    // Pseudo-labels are constants of the loss: hold them at their base value.
    for (Eigen::Index i = 0; i < base.grad.size(); ++i) {
      StgcModel probe = model;
      probe.mutable_params()(i) += kGradStep;
      const double up = drik_loss(probe, d, windows, A, plan, cfg, false, &base.frozen_val).loss;
      probe.mutable_params()(i) -= 2 * kGradStep;
      const double dn = drik_loss(probe, d, windows, A, plan, cfg, false, &base.frozen_val).loss;
      const double num = (up - dn) / (2 * kGradStep);
      const double a = base.grad(i);
      worst = std::max(worst, std::abs(a - num) / std::max({1e-6, std::abs(a), std::abs(num)}));
    }
  }
  const double secs = seconds_since(t0);
  report(1, worst < kGradRelTol && secs < kGradSeconds,
         fmt("gradient suite: max rel err %.3g (tol %.0e), %.2f s (limit %.0f s)", worst, kGradRelTol, secs,
             kGradSeconds));
}

// 2 ------------------------------------------------------------------------
void kriging_oracle() {
  Rng rng(202);
  double interp_err = 0.0, solve_err = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const Coords in = random_coords(15, rng);
    const Coords out = random_coords(5, rng);
    const Matrix x = random_matrix(15, 4, rng);
    GpKernelSpec spec;  // data-driven length scale, default nugget
    const Matrix got = gp_conditional_mean(in, out, x, spec);
    Coords all = in;
    all.insert(all.end(), out.begin(), out.end());
    const double ell = pairwise_distance_std(all);
    Matrix K = se_kernel_matrix(in, in, ell);
    K.diagonal().array() += spec.nugget;
    const Matrix Kuo = se_kernel_matrix(out, in, ell);
    for (int t = 0; t < 4; ++t) {
      const double mu = x.col(t).mean();
      const Vector want = Kuo * K.fullPivLu().solve((x.col(t).array() - mu).matrix());
      solve_err = std::max(solve_err, (got.col(t).array() - (want.array() + mu)).abs().maxCoeff());
    }

    // Nugget 0, targets coincide with inputs.
    GpKernelSpec exact;
    exact.nugget = 0.0;
    exact.length_scale = 0.1;
    const Coords targets(in.begin(), in.begin() + 5);
    const Matrix rep = gp_conditional_mean(in, targets, x, exact);
    interp_err = std::max(interp_err, (rep - x.topRows(5)).cwiseAbs().maxCoeff());
  }
  report(2, interp_err <= kKrigTol && solve_err <= kKrigTol,
         fmt("kriging oracle: coincident-target err %.3g, dense-solve err %.3g (tol %.0e)", interp_err, solve_err,
             kKrigTol));
}

// 3 ------------------------------------------------------------------------
void edge_drop_algebra() {
  Rng rng(303);
  int mismatches = 0, not_idempotent = 0, not_identity = 0;
  for (int pair = 0; pair < 200; ++pair) {
    const int n = 3 + static_cast<int>(rng.below(20));
    Matrix A = random_matrix(n, n, rng).cwiseAbs();
    for (int i = 0; i < n; ++i) {
      A(i, i) = 0.0;
      for (int j = 0; j < n; ++j)
        if (rng.uniform() < 0.3) A(i, j) = 0.0;
    }
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    const auto masked = rng.sample_without_replacement(ids, rng.below(static_cast<std::uint64_t>(n)));
    std::vector<bool> in(static_cast<std::size_t>(n), false);
    for (int v : masked) in[static_cast<std::size_t>(v)] = true;
    for (int layer = 0; layer < 3; ++layer) {
      Matrix ref(n, n);
      for (int v = 0; v < n; ++v)
        for (int u = 0; u < n; ++u) {
          const double src = layer == 0 ? (in[v] ? 0.0 : 1.0) : 1.0;
          const double pairwise = (in[v] && in[u]) ? 0.0 : 1.0;
          ref(v, u) = A(v, u) * src * pairwise;
        }
      const Matrix got = drop_edges(A, masked, layer);
      if (got != ref) ++mismatches;
      if (drop_edges(got, masked, layer) != got) ++not_idempotent;
      if (drop_edges(A, {}, layer) != A) ++not_identity;
    }
  }
  report(3, mismatches == 0 && not_idempotent == 0 && not_identity == 0,
         fmt("edge-drop algebra: 200 pairs x 3 layers, %g mismatches, %g non-idempotent, %g empty-mask changes",
             mismatches, not_idempotent, not_identity));
}

// 4 ------------------------------------------------------------------------
void geometry() {
  Rng rng(404);
  long violations = 0;
  long total = 0;
  const Coords c = random_coords(30, rng);
  GraphBuilderParams p;
  p.k = 6;
  const auto domains = perturbation_domains(build_graph(c, p));
  for (const auto& dom : domains)
    for (int i = 0; i < kDomainSamples; ++i, ++total)
      if (!dom.contains(sample_in_domain(dom, rng))) ++violations;

  // Square and regular-octagon domains are symmetric about their centroid,
  // so each quadrant holds exactly a quarter of the area.
  double worst_quadrant = 0.0;
  std::vector<Coords> shapes;
  shapes.push_back({{0, 0}, {2, 2}, {-2, 2}, {-2, -2}, {2, -2}});
  Coords oct = {{0, 0}};
  for (int k = 0; k < 8; ++k) oct.push_back({2 * std::cos(k * M_PI / 4 + 0.1), 2 * std::sin(k * M_PI / 4 + 0.1)});
  shapes.push_back(oct);
  for (const Coords& s : shapes) {
    std::vector<int> nbrs(s.size() - 1);
    std::iota(nbrs.begin(), nbrs.end(), 1);
    const NodeDomain dom = node_domain(0, s, nbrs);
    const Point cen = dom.centroid();
    long q[4] = {0, 0, 0, 0};
    for (int i = 0; i < kDomainSamples; ++i) {
      const Point x = sample_in_domain(dom, rng);
      if (!dom.contains(x)) ++violations;
      ++total;
      ++q[(x.x >= cen.x ? 0 : 1) + (x.y >= cen.y ? 0 : 2)];
    }
    for (long k : q) worst_quadrant = std::max(worst_quadrant, std::abs(static_cast<double>(k) / kDomainSamples - 0.25));
  }
  report(4, violations == 0 && worst_quadrant <= kQuadrantTol,
         fmt("geometry: %g samples, %g hull violations, worst quadrant deviation %.4f (tol %.2f)",
             static_cast<double>(total), static_cast<double>(violations), worst_quadrant, kQuadrantTol));
}

// 5 ------------------------------------------------------------------------
void leakage_audit(const fs::path& full_run_dir, const SensorField& field, const ExperimentConfig& desk) {
  const json audit = json::parse(slurp(full_run_dir / "audit_train.json"));
  const bool full_ok = audit.at("pass").get<bool>() && audit.at("violation_count").get<int>() == 0 &&
                       audit.at("reads").at("test").at("value_cells").get<int>() == 0;

  // Mis-wired control: early stopping on the test view under 2x2.
  SplitConfig sc = desk.split;
  sc.scheme = Scheme::s2x2;
  const SplitPlan plan = make_split(field, sc);
  AccessLog log;
  FieldReader reader(field, &log, Phase::train);
  TrainerConfig tc = desk.trainer;
  tc.max_epochs = 2;
  tc.patience = 1;
  ModelConfig mc = desk.model;
  mc.hidden_dim = 8;
  TrainOptions opt;
  opt.selection_view = Phase::test;
  train_drik(reader, plan, mc, tc, ablation_config(4, desk.drik), desk.normalizer, opt);
  const AuditVerdict control = audit_leakage(plan, log.records());
  report(5, full_ok && !control.pass,
         "leakage audit: full 3x3 run " + std::string(full_ok ? "clean" : "LEAKED") +
             " (" + std::to_string(audit.at("violation_count").get<int>()) + " violations), mis-wired 2x2 control " +
             (control.pass ? "passed (should fail)" : "failed with " + std::to_string(control.violation_count) +
                                                          " violations"));
}

// 6 ------------------------------------------------------------------------
void shift_diagnostics() {
  GraphBuilderParams p;
  p.kind = GraphKind::thresholded_gaussian;
  p.sigma_rule = SigmaRule::explicit_value;
  p.sigma = 1.0;
  p.delta_rule = DeltaRule::explicit_value;
  p.delta = 1.0;

  Rng rng(606);
  Coords c;
  for (int i = 0; i < 6; ++i) c.push_back({0.5 * rng.uniform(), 0.5 * rng.uniform()});
  for (int i = 0; i < 4; ++i) c.push_back({10 + 0.5 * rng.uniform(), 0.5 * rng.uniform()});
  const ShiftReport sep = shift_report(build_graph(c, p), {0, 1, 2, 3, 4, 5});
  double max_degree = 0.0;
  for (double d : sep.degree_shift) max_degree = std::max(max_degree, std::abs(d));
  const bool case1 = sep.no_cross_block_edges && sep.spectral_drift <= kShiftTol && max_degree == 0.0;

  // Three nodes: 0 -- 1 observed, 2 unseen; then one cross edge 1 -- 2.
  SpatialGraph g = build_graph({{0, 0}, {0.6, 0}, {5, 0}}, p);
  const double w = 0.37;
  g.adjacency(1, 2) = g.adjacency(2, 1) = w;
  const ShiftReport one = shift_report(g, {0, 1});
  // Oracle: dense eigensolves of both normalized observed blocks.
  const Matrix& A = g.adjacency;
  const Vector deg = A.rowwise().sum();
  Matrix restricted(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) restricted(i, j) = A(i, j) / std::sqrt(deg(i) * deg(j));
  Matrix oo = A.topLeftCorner(2, 2);
  const Vector d2 = oo.rowwise().sum();
  Matrix alone(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) alone(i, j) = oo(i, j) / std::sqrt(d2(i) * d2(j));
  Eigen::SelfAdjointEigenSolver<Matrix> e1(restricted), e2(alone);
  const double want = (e1.eigenvalues() - e2.eigenvalues()).cwiseAbs().maxCoeff();
  const double err = std::abs(one.spectral_drift - want);
  report(6, case1 && err <= kShiftTol && want > 0.0,
         fmt("shift diagnostics: case-1 drift %.3g, max degree shift %.3g; one cross edge drift %.12f vs dense %.12f",
             sep.spectral_drift, max_degree, one.spectral_drift, want));
}

// 7 ------------------------------------------------------------------------
void split_arithmetic() {
  SensorField f;
  f.coords.assign(100, Point{});
  f.values = Matrix::Zero(100, 1000);
  f.mask = BoolMatrix::Constant(100, 1000, true);
  SplitConfig cfg;
  cfg.node_ratios = {0.6, 0.2, 0.2};
  cfg.period_ratios = {0.7, 0.1, 0.2};
  const SplitPlan plan = make_split(f, cfg);
  const int n[3] = {static_cast<int>(plan.nodes_with(Role::train).size()),
                    static_cast<int>(plan.nodes_with(Role::val).size()),
                    static_cast<int>(plan.nodes_with(Role::test).size())};
  const int t[3] = {total_steps(plan.periods_with(Role::train)), total_steps(plan.periods_with(Role::val)),
                    total_steps(plan.periods_with(Role::test))};
  const bool ok = n[0] == 60 && n[1] == 20 && n[2] == 20 && t[0] == 700 && t[1] == 100 && t[2] == 200;
  char buf[160];
  std::snprintf(buf, sizeof buf, "split arithmetic: nodes %d/%d/%d, steps %d/%d/%d", n[0], n[1], n[2], t[0], t[1],
                t[2]);
  report(7, ok, buf);
}

// 8, 9 ---------------------------------------------------------------------
struct MethodResult {
  double test_mae = 0.0;
  double val_mae = 0.0;
};

MethodResult run_method(Experiment& exp, const std::string& method, const fs::path& dir) {
  if (is_model_method(method)) {
    exp.train(method);
    exp.evaluate(method, Phase::validate);
    exp.evaluate(method, Phase::test);
  } else {
    exp.baseline(method, Phase::validate);
    exp.baseline(method, Phase::test);
  }
  MethodResult r;
  r.test_mae = json::parse(slurp(dir / method / "metrics_test.json"))["metrics"]["mae"].get<double>();
  r.val_mae = json::parse(slurp(dir / method / "metrics_validate.json"))["metrics"]["mae"].get<double>();
  return r;
}

ExperimentConfig seeded(ExperimentConfig c, std::uint64_t seed, const fs::path& dir) {
  c.split.seed = seed;
  c.trainer.seed = seed;
  c.output_dir = dir.string();
  return c;
}

void end_to_end(const fs::path& work, const ExperimentConfig& desk) {
  const auto t0 = std::chrono::steady_clock::now();
  double m7_test = 0, m0_test = 0, m7_ratio = 0, m0_ratio = 0;
  bool beats_mean = false;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const fs::path dir = work / ("seed_" + std::to_string(seed));
    fs::remove_all(dir);
    Experiment exp(seeded(desk, seed, dir));
    exp.split();
    const MethodResult m7 = run_method(exp, "m7", dir);
    const MethodResult m0 = run_method(exp, "m0", dir);
    const MethodResult mean = run_method(exp, "mean", dir);
    if (seed == kSeeds.front()) beats_mean = m7.test_mae < mean.test_mae;
    m7_test += m7.test_mae / kSeeds.size();
    m0_test += m0.test_mae / kSeeds.size();
    m7_ratio += m7.test_mae / m7.val_mae / kSeeds.size();
    m0_ratio += m0.test_mae / m0.val_mae / kSeeds.size();
    std::printf("  seed %llu: M-7 test %.4f val %.4f | M-0 test %.4f val %.4f | mean test %.4f\n",
                static_cast<unsigned long long>(seed), m7.test_mae, m7.val_mae, m0.test_mae, m0.val_mae,
                mean.test_mae);
    std::fflush(stdout);
  }
  const double secs = seconds_since(t0);
  report(8, beats_mean && m7_test <= m0_test && m7_ratio <= m0_ratio && secs < kE2eSeconds,
         fmt("end-to-end: M-7 below mean on seed 42: ", 0) + (beats_mean ? "yes" : "no") +
             fmt("; mean test MAE M-7 %.4f vs M-0 %.4f; mean test/val ratio M-7 %.4f vs M-0 %.4f", m7_test, m0_test,
                 m7_ratio, m0_ratio) +
             fmt("; %.0f s (limit %.0f s)", secs, kE2eSeconds));

  // Second run of the whole criterion in a fresh directory.
  std::vector<std::string> differing;
  int compared = 0;
  for (std::uint64_t seed : kSeeds) {
    const fs::path a = work / ("seed_" + std::to_string(seed));
    const fs::path b = work / ("rerun_seed_" + std::to_string(seed));
    fs::remove_all(b);
    Experiment exp(seeded(desk, seed, b));
    exp.split();
    for (const char* m : {"m7", "m0", "mean"}) run_method(exp, m, b);
    for (const char* f : {"m7/checkpoint.stgc", "m0/checkpoint.stgc", "m7/metrics_test.json",
                          "m7/metrics_validate.json", "m0/metrics_test.json", "m0/metrics_validate.json",
                          "mean/metrics_test.json"}) {
      ++compared;
      if (!fs::exists(a / f) || slurp(a / f) != slurp(b / f)) differing.push_back(std::to_string(seed) + "/" + f);
    }
  }
  std::string what = "determinism: " + std::to_string(compared) + " checkpoint and metric files compared, " +
                     std::to_string(differing.size()) + " differ";
  for (const auto& d : differing) what += " " + d;
  report(9, differing.empty(), what);
}

// 10 -----------------------------------------------------------------------
void metric_formulas() {
  Vector truth(2), pred(2);
  truth << 2, 4;
  pred << 1, 6;
  const MetricReport r = score(pred, truth, Phase::test);
  const bool ok = r.mae == 1.5 && std::abs(r.rmse - 1.58114) <= kRmseTol && r.mape && *r.mape == 50.0;
  report(10, ok, fmt("metric formulas: MAE %.6g, RMSE %.6g, MAPE %.6g", r.mae, r.rmse, r.mape.value_or(NAN)));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s <work_dir> <desk_config.json>\n", argv[0]);
    return 2;
  }
  const fs::path work = argv[1];
  fs::create_directories(work);
  const ExperimentConfig desk = load_config(argv[2]);

  auto guard = [](int id, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      report(id, false, std::string("threw: ") + e.what());
    }
  };
  guard(1, gradient_suite);
  guard(2, kriging_oracle);
  guard(3, edge_drop_algebra);
  guard(4, geometry);
  guard(6, shift_diagnostics);
  guard(7, split_arithmetic);
  guard(10, metric_formulas);
  guard(8, [&] { end_to_end(work, desk); });
  guard(5, [&] { leakage_audit(work / "seed_42" / "m7", synth_gp_field(desk.synth), desk); });

  std::printf("%s: %d criterion failure(s)\n", g_failures ? "FAIL" : "PASS", g_failures);
  return g_failures ? 1 : 0;
}
