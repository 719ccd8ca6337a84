#include "krig/drik.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace krig {

void DrikConfig::validate() const {
  require(mask_fraction > 0.0 && mask_fraction < 1.0, ErrorKind::config, "drik.mask_fraction must lie in (0, 1)");
  require(perturb_every >= 1, ErrorKind::config, "drik.perturb_every must be at least 1");
}

DrikConfig ablation_config(int index, DrikConfig base) {
  static constexpr bool table[8][3] = {{false, false, false}, {true, false, false}, {false, true, false},
                                       {false, false, true},  {true, true, false},  {true, false, true},
                                       {false, true, true},   {true, true, true}};
  require(index >= 0 && index < 8, ErrorKind::config, "ablation index must lie in 0..7");
  base.enable_np = table[index][0];
  base.enable_ed = table[index][1];
  base.enable_sa = table[index][2];
  return base;
}

int parse_ablation(const std::string& method) {
  if (method == "drik") return 7;
  if (method.size() == 2 && method[0] == 'm' && method[1] >= '0' && method[1] <= '7') return method[1] - '0';
  throw Error(ErrorKind::config, "unknown model method '" + method + "'");
}

PassPlan sample_pass_plan(int n_train, double fraction, bool two_pass, Rng& rng) {
  const int k = std::max(1, static_cast<int>(std::lround(fraction * n_train)));
  require((two_pass ? 2 * k : k) < n_train, ErrorKind::degenerate_batch,
          "masking " + std::to_string(two_pass ? 2 * k : k) + " of " + std::to_string(n_train) +
              " training nodes leaves no unmasked source");
  std::vector<int> pool(static_cast<std::size_t>(n_train));
  std::iota(pool.begin(), pool.end(), 0);
  PassPlan plan;
  plan.pass_of.assign(static_cast<std::size_t>(n_train), 0);
  plan.m1 = rng.sample_without_replacement(pool, static_cast<std::size_t>(k));
  for (int v : plan.m1) plan.pass_of[static_cast<std::size_t>(v)] = 1;
  if (two_pass) {
    std::vector<int> rest;
    for (int v : pool)
      if (plan.pass_of[static_cast<std::size_t>(v)] == 0) rest.push_back(v);
    plan.m2 = rng.sample_without_replacement(rest, static_cast<std::size_t>(k));
    for (int v : plan.m2) plan.pass_of[static_cast<std::size_t>(v)] = 2;
  }
  return plan;
}

std::vector<NodeDomain> perturbation_domains(const SpatialGraph& graph) {
  const int n = graph.size();
  std::vector<NodeDomain> out;
  out.reserve(static_cast<std::size_t>(n));
  std::vector<std::vector<int>> nearest;
  for (int v = 0; v < n; ++v) {
    std::vector<int> nbrs;
    for (int u = 0; u < n; ++u)
      if (u != v && graph.adjacency(v, u) != 0.0) nbrs.push_back(u);
    if (nbrs.empty()) {
      if (nearest.empty()) nearest = knn(graph.coords, 1);
      nbrs = nearest[static_cast<std::size_t>(v)];
    }
    out.push_back(node_domain(v, graph.coords, nbrs));
  }
  return out;
}

PerturbedGraph perturb_and_rebuild(const std::vector<NodeDomain>& domains, const GraphBuilderParams& resolved,
                                   Rng& rng) {
  PerturbedGraph g;
  g.coords.reserve(domains.size());
  for (const NodeDomain& d : domains) g.coords.push_back(sample_in_domain(d, rng));
  g.adjacency = build_graph(g.coords, resolved).adjacency;
  return g;
}

TrainingData load_training_data(const FieldReader& reader, const SplitPlan& plan, const Normalizer& normalizer,
                                bool with_val_topology) {
  TrainingData d;
  d.train_ids = plan.nodes_with(Role::train);
  const auto periods = plan.periods_with(Role::train);
  BlockValues block = read_block(reader, d.train_ids, periods);
  d.observed = block.observed;
  d.values = Matrix::Zero(block.values.rows(), block.values.cols());
  for (Eigen::Index i = 0; i < d.values.rows(); ++i)
    for (Eigen::Index t = 0; t < d.values.cols(); ++t)
      if (d.observed(i, t)) d.values(i, t) = normalizer.forward(d.train_ids[static_cast<std::size_t>(i)], block.values(i, t));
  int col = 0;
  for (const StepRange& r : periods) {
    d.runs.push_back({col, col + r.length()});
    col += r.length();
  }
  d.train_coords = reader.coords(d.train_ids);
  if (with_val_topology) {
    d.val_ids = plan.nodes_with(Role::val);
    d.val_coords = reader.coords(d.val_ids);
  }
  return d;
}

std::vector<StepRange> epoch_windows(const std::vector<StepRange>& runs, int window, Rng& rng) {
  std::vector<StepRange> out;
  for (const StepRange& r : runs) {
    const int offset = r.length() > window ? static_cast<int>(rng.below(static_cast<std::uint64_t>(window))) : 0;
    if (offset > 0) out.push_back({r.begin, r.begin + offset});
    for (int t = r.begin + offset; t < r.end; t += window) out.push_back({t, std::min(t + window, r.end)});
  }
  rng.shuffle(out);
  return out;
}

namespace {

std::vector<Matrix> layer_adjacency(const Matrix& A, const std::vector<int>& masked, int n_layers, bool drop) {
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(n_layers));
  for (int l = 0; l < n_layers; ++l) out.push_back(drop ? drop_edges(A, masked, l) : A);
  return out;
}

std::vector<int> window_lengths(const std::vector<StepRange>& windows) {
  std::vector<int> lengths;
  for (const StepRange& w : windows) lengths.push_back(w.length());
  return lengths;
}

}  // namespace

DrikLoss drik_loss(const StgcModel& model, const TrainingData& data, const std::vector<StepRange>& windows,
                   const Matrix& adjacency, const PassPlan& plan, const DrikConfig& cfg, bool with_grad,
                   const Vector* frozen_override) {
  const bool sa = cfg.enable_sa && data.n_val() > 0;
  const int n_tr = data.n_train();
  const int n_val = sa ? data.n_val() : 0;
  const int Nu = n_tr + n_val;
  require(adjacency.rows() == Nu && adjacency.cols() == Nu, ErrorKind::shape,
          "adjacency does not match the training graph size");
  require(static_cast<int>(plan.pass_of.size()) == n_tr, ErrorKind::shape, "pass plan does not match training nodes");

  WindowBatch batch = make_window_batch(Nu, window_lengths(windows), 1);
  const int S = batch.slots();
  Vector target = Vector::Zero(batch.features.rows());
  std::vector<Eigen::Index> cells1, cells2;
  int s = 0;
  for (const StepRange& w : windows)
    for (int t = w.begin; t < w.end; ++t, ++s)
      for (int v = 0; v < n_tr; ++v) {
        const Eigen::Index r = batch.row(v, s);
        batch.features(r, 0) = data.values(v, t);
        target(r) = data.values(v, t);
        if (!data.observed(v, t)) continue;
        const int pass = plan.pass_of[static_cast<std::size_t>(v)];
        if (pass == 1) cells1.push_back(r);
        else if (pass == 2 && sa) cells2.push_back(r);
      }

  DrikLoss out;
  out.cells = cells1.size() + cells2.size();
  if (with_grad) out.grad = Vector::Zero(static_cast<Eigen::Index>(model.param_count()));
  if (out.cells == 0) return out;
  const double inv = 1.0 / static_cast<double>(out.cells);
  const int L = model.config().n_layers;

  auto accumulate = [&](const Vector& pred, const std::vector<Eigen::Index>& cells, const ForwardCache& cache) {
    Vector adjoint;
    if (with_grad) adjoint = Vector::Zero(pred.size());
    double sum = 0.0;
    for (Eigen::Index r : cells) {
      const double e = pred(r) - target(r);
      sum += std::abs(e);
      if (with_grad) adjoint(r) = e > 0.0 ? inv : (e < 0.0 ? -inv : 0.0);
    }
    if (with_grad) out.grad += stgc_backward(model, cache, adjoint);
    return sum;
  };

  // Pass 1: M1 and every validation node hidden.
  WindowBatch pass1 = batch;
  std::vector<int> masked1 = plan.m1;
  for (int v : plan.m1)
    for (int k = 0; k < S; ++k) pass1.features(pass1.row(v, k), 0) = 0.0;
  for (int j = 0; j < n_val; ++j) masked1.push_back(n_tr + j);
  ForwardCache cache;
  const Vector pred1 = stgc_forward(model, pass1, layer_adjacency(adjacency, masked1, L, cfg.enable_ed),
                                    with_grad ? &cache : nullptr);
  double sum = accumulate(pred1, cells1, cache);

  if (sa) {
    if (frozen_override) {
      require(frozen_override->size() == static_cast<Eigen::Index>(n_val) * S, ErrorKind::shape,
              "frozen validation override has the wrong size");
      out.frozen_val = *frozen_override;
    } else {
      out.frozen_val.resize(static_cast<Eigen::Index>(n_val) * S);
      for (int k = 0; k < S; ++k)
        for (int j = 0; j < n_val; ++j)
          out.frozen_val(j + static_cast<Eigen::Index>(n_val) * k) = pred1(batch.row(n_tr + j, k));
    }
    // Pass 2: validation inputs clamped to the frozen pass-1 output, M2 hidden.
    WindowBatch pass2 = std::move(batch);
    for (int v : plan.m2)
      for (int k = 0; k < S; ++k) pass2.features(pass2.row(v, k), 0) = 0.0;
    for (int k = 0; k < S; ++k)
      for (int j = 0; j < n_val; ++j)
        pass2.features(pass2.row(n_tr + j, k), 0) = out.frozen_val(j + static_cast<Eigen::Index>(n_val) * k);
    const Vector pred2 = stgc_forward(model, pass2, layer_adjacency(adjacency, plan.m2, L, cfg.enable_ed),
                                      with_grad ? &cache : nullptr);
    sum += accumulate(pred2, cells2, cache);
  }
  out.loss = sum * inv;
  return out;
}

DrikState make_drik_state(const TrainingData& data, const DrikConfig& cfg) {
  Coords coords = data.train_coords;
  std::vector<int> ids = data.train_ids;
  if (cfg.enable_sa) {
    coords.insert(coords.end(), data.val_coords.begin(), data.val_coords.end());
    ids.insert(ids.end(), data.val_ids.begin(), data.val_ids.end());
  }
  GraphBuilderParams params = cfg.graph;
  if (params.kind == GraphKind::knn_row_normalized)
    params.k = std::min(params.k, static_cast<int>(coords.size()) - 1);
  DrikState st;
  st.base_graph = build_graph(coords, params, ids);
  if (cfg.enable_np) st.domains = perturbation_domains(st.base_graph);
  st.adjacency = st.base_graph.adjacency;
  return st;
}

double drik_iteration(StgcModel& model, DrikState& state, const TrainingData& data,
                      const std::vector<StepRange>& windows, const DrikConfig& cfg, const TrainerConfig& trainer,
                      Rng& rng) {
  if (cfg.enable_np && state.iteration % cfg.perturb_every == 0)
    state.adjacency = perturb_and_rebuild(state.domains, state.base_graph.params, rng).adjacency;
  const bool two_pass = cfg.enable_sa && data.n_val() > 0;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const PassPlan plan = sample_pass_plan(data.n_train(), cfg.mask_fraction, two_pass, rng);
    DrikLoss r = drik_loss(model, data, windows, state.adjacency, plan, cfg, true);
    if (r.cells == 0) continue;
    adam_step(model, r.grad, state.adam, trainer.learning_rate, trainer.clip_threshold);
    ++state.iteration;
    return r.loss;
  }
  throw Error(ErrorKind::degenerate_batch, "no observed masked cell in the batch after resampling");
}

KrigingProblem make_kriging_problem(const FieldReader& reader, const PhaseView& view,
                                    const GraphBuilderParams& graph, const Normalizer& normalizer) {
  KrigingProblem p;
  p.input_ids = view.inputs.nodes;
  p.target_ids = view.targets.nodes;
  p.periods = view.targets.periods;
  require(p.input_ids.size() >= 1 && !p.target_ids.empty(), ErrorKind::config,
          "kriging needs at least one input and one target node");
  BlockValues block = read_block(reader, p.input_ids, view.inputs.periods);
  p.input_values = Matrix::Zero(block.values.rows(), block.values.cols());
  for (Eigen::Index i = 0; i < block.values.rows(); ++i)
    for (Eigen::Index t = 0; t < block.values.cols(); ++t)
      if (block.observed(i, t))
        p.input_values(i, t) = normalizer.forward(p.input_ids[static_cast<std::size_t>(i)], block.values(i, t));
  Coords coords = reader.coords(p.input_ids);
  const Coords tc = reader.coords(p.target_ids);
  coords.insert(coords.end(), tc.begin(), tc.end());
  std::vector<int> ids = p.input_ids;
  ids.insert(ids.end(), p.target_ids.begin(), p.target_ids.end());
  GraphBuilderParams params = graph;
  if (params.kind == GraphKind::knn_row_normalized)
    params.k = std::min(params.k, static_cast<int>(coords.size()) - 1);
  p.adjacency = build_graph(coords, params, ids).adjacency;
  return p;
}

Matrix predict_problem(const StgcModel& model, const KrigingProblem& problem, int batch_windows) {
  const int n_in = static_cast<int>(problem.input_ids.size());
  const int n_t = static_cast<int>(problem.target_ids.size());
  const int Nu = n_in + n_t;
  const int W = model.config().window_size;
  std::vector<StepRange> windows;
  int col = 0;
  for (const StepRange& r : problem.periods) {
    for (int t = col; t < col + r.length(); t += W) windows.push_back({t, std::min(t + W, col + r.length())});
    col += r.length();
  }
  Matrix out = Matrix::Zero(n_t, col);
  const std::vector<Matrix> adjacency(static_cast<std::size_t>(model.config().n_layers), problem.adjacency);
  for (std::size_t w0 = 0; w0 < windows.size(); w0 += static_cast<std::size_t>(batch_windows)) {
    const std::size_t w1 = std::min(windows.size(), w0 + static_cast<std::size_t>(batch_windows));
    const std::vector<StepRange> chunk(windows.begin() + static_cast<std::ptrdiff_t>(w0),
                                       windows.begin() + static_cast<std::ptrdiff_t>(w1));
    WindowBatch batch = make_window_batch(Nu, window_lengths(chunk), 1);
    int s = 0;
    for (const StepRange& w : chunk)
      for (int t = w.begin; t < w.end; ++t, ++s)
        for (int v = 0; v < n_in; ++v) batch.features(batch.row(v, s), 0) = problem.input_values(v, t);
    const Vector pred = stgc_forward(model, batch, adjacency);
    s = 0;
    for (const StepRange& w : chunk)
      for (int t = w.begin; t < w.end; ++t, ++s)
        for (int j = 0; j < n_t; ++j) out(j, t) = pred(batch.row(n_in + j, s));
  }
  return out;
}

KrigePrediction krige_predict(const StgcModel& model, const FieldReader& reader, const SplitPlan& plan, Phase phase,
                              const GraphBuilderParams& graph, const Normalizer& normalizer) {
  const KrigingProblem problem = make_kriging_problem(reader, phase_views(plan, phase), graph, normalizer);
  return {problem.target_ids, problem.periods, predict_problem(model, problem)};
}

double denormalized_mae(const KrigePrediction& pred, const Normalizer& normalizer, const Matrix& truth,
                        const BoolMatrix& observed) {
  require(truth.rows() == pred.normalized.rows() && truth.cols() == pred.normalized.cols(), ErrorKind::shape,
          "truth block does not match the prediction block");
  double sum = 0.0;
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    const int node = pred.target_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index t = 0; t < truth.cols(); ++t)
      if (observed(i, t)) {
        sum += std::abs(normalizer.inverse(node, pred.normalized(i, t)) - truth(i, t));
        ++n;
      }
  }
  require(n > 0, ErrorKind::config, "no observed target cell to score");
  return sum / static_cast<double>(n);
}

TrainResult train_drik(const FieldReader& reader, const SplitPlan& plan, const ModelConfig& model_cfg,
                       const TrainerConfig& trainer, const DrikConfig& cfg, NormalizerKind normalizer_kind,
                       const TrainOptions& options) {
  model_cfg.validate();
  trainer.validate();
  cfg.validate();
  require(!cfg.enable_sa || plan.scheme == Scheme::s3x3, ErrorKind::config,
          "subgraph addition needs the 3x3 scheme (validation nodes must exist)");

  const FieldReader train_reader = reader.with_phase(Phase::train);
  Normalizer normalizer = fit_normalizer(train_reader, plan.block(Role::train, Role::train), normalizer_kind);
  const TrainingData data = load_training_data(train_reader, plan, normalizer, cfg.enable_sa);
  require(data.n_train() >= 2, ErrorKind::config, "training needs at least 2 training nodes");

  StgcModel model(model_cfg);
  Rng init_rng(mix_seed(trainer.seed, 1));
  model.init(init_rng);
  DrikState state = make_drik_state(data, cfg);
  Rng rng(mix_seed(trainer.seed, 2));

  const FieldReader val_reader = reader.with_phase(Phase::validate);
  const PhaseView view = phase_views(plan, options.selection_view);
  const KrigingProblem problem = make_kriging_problem(val_reader, view, cfg.graph, normalizer);
  const BlockValues truth = read_block(val_reader, view.targets.nodes, view.targets.periods);

  auto train_fn = [&](int) {
    const auto windows = epoch_windows(data.runs, model_cfg.window_size, rng);
    double total = 0.0;
    int batches = 0;
    for (std::size_t b = 0; b < windows.size(); b += static_cast<std::size_t>(trainer.batch_size)) {
      const std::size_t e = std::min(windows.size(), b + static_cast<std::size_t>(trainer.batch_size));
      const std::vector<StepRange> chunk(windows.begin() + static_cast<std::ptrdiff_t>(b),
                                         windows.begin() + static_cast<std::ptrdiff_t>(e));
      total += drik_iteration(model, state, data, chunk, cfg, trainer, rng);
      ++batches;
    }
    return batches ? total / batches : 0.0;
  };
  auto validate_fn = [&] {
    const KrigePrediction p{problem.target_ids, problem.periods, predict_problem(model, problem)};
    return denormalized_mae(p, normalizer, truth.values, truth.observed);
  };
  EarlyStopResult history = early_stop_loop(trainer, model, train_fn, validate_fn, options.on_epoch);
  return {std::move(model), std::move(normalizer), std::move(history)};
}

}  // namespace krig
