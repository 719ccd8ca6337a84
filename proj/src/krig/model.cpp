#include "krig/model.hpp"

#include "krig/binio.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace krig {

void ModelConfig::validate() const {
  require(n_layers >= 1, ErrorKind::config, "model.n_layers must be at least 1");
  require(temporal_halfwidth >= 0, ErrorKind::config, "model.temporal_halfwidth must be nonnegative");
  require(hidden_dim >= 1 && in_channels >= 1, ErrorKind::config, "model dimensions must be positive");
  require(window_size > 2 * temporal_halfwidth, ErrorKind::config,
          "model.window_size must exceed 2 * temporal_halfwidth");
}

std::size_t StgcModel::param_count_for(const ModelConfig& c) {
  const std::size_t K = static_cast<std::size_t>(2 * c.temporal_halfwidth + 1);
  const std::size_t D = static_cast<std::size_t>(c.hidden_dim);
  std::size_t n = 0;
  for (int l = 0; l < c.n_layers; ++l) {
    const std::size_t cin = l == 0 ? static_cast<std::size_t>(c.in_channels) : D;
    n += K * cin * D + D * D + D;
  }
  return n + D + 1;
}

StgcModel::StgcModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int K = 2 * config_.temporal_halfwidth + 1;
  const int D = config_.hidden_dim;
  std::size_t offset = 0;
  auto add = [&](std::string name, int rows, int cols) {
    slots_.push_back({std::move(name), rows, cols, offset});
    offset += slots_.back().size();
  };
  for (int l = 0; l < config_.n_layers; ++l) {
    const int cin = l == 0 ? config_.in_channels : D;
    const std::string p = "layer" + std::to_string(l) + ".";
    add(p + "w_gc", K * cin, D);
    add(p + "w_fc", D, D);
    add(p + "b", 1, D);
  }
  add("readout.w", D, 1);
  add("readout.b", 1, 1);
  params_ = Vector::Zero(static_cast<Eigen::Index>(offset));
}

Eigen::Map<const Matrix> StgcModel::tensor(std::size_t slot) const {
  const TensorSlot& s = slots_.at(slot);
  return {params_.data() + s.offset, s.rows, s.cols};
}

std::size_t StgcModel::slot_index(const std::string& name) const {
  for (std::size_t i = 0; i < slots_.size(); ++i)
    if (slots_[i].name == name) return i;
  throw Error(ErrorKind::config, "no parameter tensor named " + name);
}

void StgcModel::init(Rng& rng) {
  ++version_;
  params_.setZero();
  for (const TensorSlot& s : slots_) {
    if (s.rows == 1) continue;  // biases
    const double a = std::sqrt(6.0 / (s.rows + s.cols));
    for (std::size_t i = 0; i < s.size(); ++i)
      params_(static_cast<Eigen::Index>(s.offset + i)) = a * (2.0 * rng.uniform() - 1.0);
  }
}

int WindowBatch::slots() const {
  int s = 0;
  for (int len : lengths) s += len;
  return s;
}

WindowBatch make_window_batch(int n_nodes, std::vector<int> lengths, int channels) {
  WindowBatch b;
  b.n_nodes = n_nodes;
  b.lengths = std::move(lengths);
  for (int len : b.lengths) require(len >= 1, ErrorKind::shape, "window lengths must be positive");
  b.features = Matrix::Zero(static_cast<Eigen::Index>(n_nodes) * b.slots(), channels);
  return b;
}

namespace {

// For each window and offset o, the run of destination slots whose source
// slot s + o stays inside the window: calls f(dst_row, src_row, rows).
template <class F>
void for_each_shift(int n_nodes, const std::vector<int>& lengths, int o, F&& f) {
  const Eigen::Index N = n_nodes;
  int a = 0;
  for (int len : lengths) {
    const int count = len - std::abs(o);
    if (count > 0) {
      const int dst = a + std::max(0, -o);
      f(N * dst, N * (dst + o), N * count);
    }
    a += len;
  }
}

Matrix gc_weights_wide(const Eigen::Map<const Matrix>& w_gc, int K, int cin, int D) {
  Matrix wide(cin, K * D);
  for (int j = 0; j < K; ++j) wide.middleCols(j * D, D) = w_gc.middleRows(j * cin, cin);
  return wide;
}

void check_batch(const StgcModel& model, const WindowBatch& batch, const std::vector<Matrix>& adjacency) {
  const ModelConfig& c = model.config();
  require(static_cast<int>(adjacency.size()) == c.n_layers, ErrorKind::shape,
          "need one adjacency matrix per layer");
  require(batch.features.cols() == c.in_channels, ErrorKind::shape, "input channel count mismatch");
  require(batch.features.rows() == static_cast<Eigen::Index>(batch.n_nodes) * batch.slots(),
          ErrorKind::shape, "feature rows != nodes * slots");
  for (const Matrix& A : adjacency)
    require(A.rows() == batch.n_nodes && A.cols() == batch.n_nodes, ErrorKind::shape,
            "adjacency size does not match the node count");
}

}  // namespace

Matrix temporal_concat(const Matrix& Z, int n_nodes, const std::vector<int>& lengths, int m) {
  const Eigen::Index C = Z.cols();
  const int K = 2 * m + 1;
  Matrix out = Matrix::Zero(Z.rows(), K * C);
  for (int j = 0; j < K; ++j)
    for_each_shift(n_nodes, lengths, j - m, [&](Eigen::Index dst, Eigen::Index src, Eigen::Index rows) {
      out.block(dst, j * C, rows, C) = Z.block(src, 0, rows, C);
    });
  return out;
}

Vector stgc_forward(const StgcModel& model, const WindowBatch& batch, const std::vector<Matrix>& adjacency,
                    ForwardCache* cache) {
  check_batch(model, batch, adjacency);
  const ModelConfig& c = model.config();
  const int K = 2 * c.temporal_halfwidth + 1;
  const int D = c.hidden_dim;
  const int N = batch.n_nodes;
  const Eigen::Index S = batch.slots();
  const Eigen::Index R = batch.features.rows();

  if (cache) {
    cache->model_version = model.version();
    cache->valid = true;
    cache->n_nodes = N;
    cache->lengths = batch.lengths;
    cache->adjacency = adjacency;
    cache->layer_input.assign(static_cast<std::size_t>(c.n_layers), Matrix());
    cache->aggregated.assign(static_cast<std::size_t>(c.n_layers), Matrix());
    cache->pre_act.assign(static_cast<std::size_t>(c.n_layers), Matrix());
  }

  Matrix H = batch.features;
  Matrix Y(R, D), M(R, D);
  for (int l = 0; l < c.n_layers; ++l) {
    const int cin = static_cast<int>(H.cols());
    const auto w_gc = model.tensor(static_cast<std::size_t>(3 * l));
    const auto w_fc = model.tensor(static_cast<std::size_t>(3 * l + 1));
    const auto b = model.tensor(static_cast<std::size_t>(3 * l + 2));

    const Matrix G = H * gc_weights_wide(w_gc, K, cin, D);
    Y.setZero();
    for (int j = 0; j < K; ++j)
      for_each_shift(N, batch.lengths, j - c.temporal_halfwidth,
                     [&](Eigen::Index dst, Eigen::Index src, Eigen::Index rows) {
                       Y.middleRows(dst, rows) += G.block(src, j * D, rows, D);
                     });
    Eigen::Map<const Matrix> y_view(Y.data(), N, S * D);
    Eigen::Map<Matrix> m_view(M.data(), N, S * D);
    m_view.noalias() = adjacency[static_cast<std::size_t>(l)].transpose() * y_view;

    Matrix U = M * w_fc;
    U.rowwise() += b.row(0);
    if (cache) {
      cache->layer_input[static_cast<std::size_t>(l)] = std::move(H);
      cache->aggregated[static_cast<std::size_t>(l)] = M;
    }
    H = U.cwiseMax(0.0);
    if (cache) cache->pre_act[static_cast<std::size_t>(l)] = std::move(U);
  }
  const std::size_t ro = static_cast<std::size_t>(3 * c.n_layers);
  Vector pred = H * model.tensor(ro);
  pred.array() += model.tensor(ro + 1)(0, 0);
  if (cache) cache->last_hidden = std::move(H);
  return pred;
}

Vector stgc_backward(const StgcModel& model, const ForwardCache& cache, const Vector& adjoint) {
  require(cache.valid && cache.model_version == model.version(), ErrorKind::contract,
          "forward cache is stale: parameters changed after the forward pass");
  const ModelConfig& c = model.config();
  require(adjoint.size() == cache.last_hidden.rows(), ErrorKind::shape, "adjoint size != prediction count");
  const int K = 2 * c.temporal_halfwidth + 1;
  const int D = c.hidden_dim;
  const int N = cache.n_nodes;
  const Eigen::Index R = cache.last_hidden.rows();
  const Eigen::Index S = R / N;

  Vector grad = Vector::Zero(static_cast<Eigen::Index>(model.param_count()));
  auto slot_grad = [&](std::size_t i) {
    const TensorSlot& s = model.slots()[i];
    return Eigen::Map<Matrix>(grad.data() + s.offset, s.rows, s.cols);
  };

  const std::size_t ro = static_cast<std::size_t>(3 * c.n_layers);
  slot_grad(ro).noalias() = cache.last_hidden.transpose() * adjoint;
  slot_grad(ro + 1)(0, 0) = adjoint.sum();
  Matrix dH = adjoint * model.tensor(ro).transpose();

  Matrix dY(R, D);
  for (int l = c.n_layers - 1; l >= 0; --l) {
    const std::size_t li = static_cast<std::size_t>(l);
    const Matrix& H = cache.layer_input[li];
    const int cin = static_cast<int>(H.cols());
    const auto w_gc = model.tensor(3 * li);
    const auto w_fc = model.tensor(3 * li + 1);

    Matrix dU = (cache.pre_act[li].array() > 0.0).select(dH, 0.0);
    slot_grad(3 * li + 1).noalias() = cache.aggregated[li].transpose() * dU;
    slot_grad(3 * li + 2) = dU.colwise().sum();
    const Matrix dM = dU * w_fc.transpose();

    Eigen::Map<const Matrix> dm_view(dM.data(), N, S * D);
    Eigen::Map<Matrix> dy_view(dY.data(), N, S * D);
    dy_view.noalias() = cache.adjacency[li] * dm_view;

    Matrix dG = Matrix::Zero(R, K * D);
    for (int j = 0; j < K; ++j)
      for_each_shift(N, cache.lengths, j - c.temporal_halfwidth,
                     [&](Eigen::Index dst, Eigen::Index src, Eigen::Index rows) {
                       dG.block(src, j * D, rows, D) += dY.middleRows(dst, rows);
                     });
    const Matrix dW = H.transpose() * dG;  // cin x K*D
    auto g_gc = slot_grad(3 * li);
    for (int j = 0; j < K; ++j) g_gc.middleRows(j * cin, cin) = dW.middleCols(j * D, D);
    if (l > 0) dH = dG * gc_weights_wide(w_gc, K, cin, D).transpose();
  }
  return grad;
}

double mae_loss(const Vector& pred, const Vector& target, const std::vector<Eigen::Index>& cells,
                Vector* adjoint) {
  require(!cells.empty(), ErrorKind::config, "MAE over an empty cell set");
  require(pred.size() == target.size(), ErrorKind::shape, "prediction and target sizes differ");
  const double inv = 1.0 / static_cast<double>(cells.size());
  if (adjoint) *adjoint = Vector::Zero(pred.size());
  double sum = 0.0;
  for (Eigen::Index r : cells) {
    const double e = pred(r) - target(r);
    sum += std::abs(e);
    if (adjoint) (*adjoint)(r) += (e > 0.0 ? inv : (e < 0.0 ? -inv : 0.0));
  }
  return sum * inv;
}

void TrainerConfig::validate() const {
  require(learning_rate > 0.0, ErrorKind::config, "trainer.learning_rate must be positive");
  require(max_epochs >= 1, ErrorKind::config, "trainer.max_epochs must be at least 1");
  require(patience >= 1 && patience < max_epochs, ErrorKind::config,
          "trainer.patience must lie in [1, max_epochs)");
  require(batch_size >= 1, ErrorKind::config, "trainer.batch_size must be positive");
  require(mask_fraction > 0.0 && mask_fraction < 1.0, ErrorKind::config,
          "trainer.mask_fraction must lie in (0, 1)");
}

AdamStepInfo adam_step(Vector& params, const Vector& grads, AdamState& state, double lr, double clip,
                       const std::vector<TensorSlot>* slots) {
  require(grads.size() == params.size(), ErrorKind::shape, "gradient size != parameter count");
  for (Eigen::Index i = 0; i < grads.size(); ++i) {
    if (std::isfinite(grads(i))) continue;
    std::string where = "parameter " + std::to_string(i);
    if (slots)
      for (const TensorSlot& s : *slots)
        if (static_cast<std::size_t>(i) >= s.offset && static_cast<std::size_t>(i) < s.offset + s.size())
          where = "tensor " + s.name;
    throw Error(ErrorKind::training_abort, "non-finite gradient in " + where);
  }
  if (state.m.size() != params.size()) {
    state.m = Vector::Zero(params.size());
    state.v = Vector::Zero(params.size());
    state.step = 0;
  }
  AdamStepInfo info;
  info.grad_norm = grads.norm();
  double scale = 1.0;
  if (clip > 0.0 && info.grad_norm > clip) {
    scale = clip / info.grad_norm;
    info.clipped = true;
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++state.step;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double g = grads(i) * scale;
    state.m(i) = b1 * state.m(i) + (1.0 - b1) * g;
    state.v(i) = b2 * state.v(i) + (1.0 - b2) * g * g;
    params(i) -= lr * (state.m(i) / c1) / (std::sqrt(state.v(i) / c2) + eps);
  }
  require(params.allFinite(), ErrorKind::training_abort, "parameters became non-finite after an Adam step");
  return info;
}

AdamStepInfo adam_step(StgcModel& model, const Vector& grads, AdamState& state, double lr, double clip) {
  return adam_step(model.mutable_params(), grads, state, lr, clip, &model.slots());
}

EarlyStopResult early_stop_loop(const TrainerConfig& trainer, StgcModel& model,
                                const std::function<double(int)>& train_fn,
                                const std::function<double()>& validate_fn,
                                const std::function<void(const EpochRecord&)>& on_epoch) {
  trainer.validate();
  const auto t0 = std::chrono::steady_clock::now();
  EarlyStopResult result;
  Vector best = model.params();
  int stale = 0;
  for (int epoch = 1; epoch <= trainer.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_fn(epoch);
    rec.val_mae = validate_fn();
    rec.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.improved = result.best_epoch == 0 || rec.val_mae < result.best_val;
    if (rec.improved) {
      result.best_epoch = epoch;
      result.best_val = rec.val_mae;
      best = model.params();
      stale = 0;
    } else {
      ++stale;
    }
    result.history.push_back(rec);
    result.epochs_run = epoch;
    if (on_epoch) on_epoch(rec);
    if (stale >= trainer.patience) break;
  }
  model.mutable_params() = best;
  return result;
}

namespace {
constexpr char kCheckpointMagic[4] = {'S', 'T', 'G', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const StgcModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write checkpoint " + path);
  out.write(kCheckpointMagic, 4);
  binio::write_le<std::uint32_t>(out, kCheckpointVersion);
  const ModelConfig& c = model.config();
  for (int v : {c.n_layers, c.temporal_halfwidth, c.hidden_dim, c.window_size, c.in_channels})
    binio::write_le<std::int32_t>(out, v);
  binio::write_le<std::uint64_t>(out, model.param_count());
  for (Eigen::Index i = 0; i < model.params().size(); ++i) binio::write_le<double>(out, model.params()(i));
  require(static_cast<bool>(out), ErrorKind::io, "failed writing checkpoint " + path);
}

StgcModel load_checkpoint(const std::string& path) {
  require(std::filesystem::is_regular_file(path), ErrorKind::checkpoint_not_found,
          "no checkpoint at " + path);
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open checkpoint " + path);
  char magic[4] = {};
  in.read(magic, 4);
  require(in && std::equal(magic, magic + 4, kCheckpointMagic), ErrorKind::parse,
          path + " is not an STGC checkpoint");
  const auto version = binio::read_le<std::uint32_t>(in);
  require(version == kCheckpointVersion, ErrorKind::parse,
          "unsupported checkpoint version " + std::to_string(version));
  ModelConfig c;
  c.n_layers = binio::read_le<std::int32_t>(in);
  c.temporal_halfwidth = binio::read_le<std::int32_t>(in);
  c.hidden_dim = binio::read_le<std::int32_t>(in);
  c.window_size = binio::read_le<std::int32_t>(in);
  c.in_channels = binio::read_le<std::int32_t>(in);
  StgcModel model(c);
  const auto count = binio::read_le<std::uint64_t>(in);
  require(count == model.param_count(), ErrorKind::parse, "checkpoint parameter count does not match its config");
  Vector& p = model.mutable_params();
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = binio::read_le<double>(in);
  return model;
}

}  // namespace krig
