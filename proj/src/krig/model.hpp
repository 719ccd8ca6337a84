#pragma once

#include "krig/common.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace krig {

struct ModelConfig {
  int n_layers = 2;
  int temporal_halfwidth = 1;  // m
  int hidden_dim = 64;         // D
  int window_size = 24;
  int in_channels = 1;

  /// Throws ErrorKind::config unless L >= 1, window_size > 2m and dims > 0.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TensorSlot {
  std::string name;  // e.g. "layer0.w_gc"
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// STGC network with all parameters in one flat vector. Per layer l:
/// w_gc ((2m+1) C_in x D), w_fc (D x D), b (1 x D); then readout w (D x 1)
/// and bias (1 x 1). Tensors are column-major views into the flat vector.
class StgcModel {
 public:
  explicit StgcModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::size_t param_count() const { return static_cast<std::size_t>(params_.size()); }
  const std::vector<TensorSlot>& slots() const { return slots_; }

  const Vector& params() const { return params_; }
  /// Mutable access. Invalidates every forward cache taken earlier.
  Vector& mutable_params() {
    ++version_;
    return params_;
  }
  std::uint64_t version() const { return version_; }

  Eigen::Map<const Matrix> tensor(std::size_t slot) const;
  std::size_t slot_index(const std::string& name) const;

  /// Glorot-uniform weights, zero biases.
  void init(Rng& rng);

  static std::size_t param_count_for(const ModelConfig& config);

 private:
  ModelConfig config_;
  std::vector<TensorSlot> slots_;
  Vector params_;
  std::uint64_t version_ = 0;
};

/// A batch of time windows over the same N nodes. Slot s runs over the
/// concatenated window steps; `features` is (N * S) x C with row n + N * s.
struct WindowBatch {
  int n_nodes = 0;
  std::vector<int> lengths;  // per window, each >= 1
  Matrix features;

  int slots() const;
  Eigen::Index row(int node, int slot) const { return node + static_cast<Eigen::Index>(n_nodes) * slot; }
};

WindowBatch make_window_batch(int n_nodes, std::vector<int> lengths, int channels);

/// Stacks [Z_{i-m}; ...; Z_{i+m}] along channels, within each window, with
/// zero blocks past the window edges. Input and output use the WindowBatch
/// row layout.
Matrix temporal_concat(const Matrix& Z, int n_nodes, const std::vector<int>& lengths, int m);

struct ForwardCache {
  std::uint64_t model_version = 0;
  bool valid = false;
  int n_nodes = 0;
  std::vector<int> lengths;
  std::vector<Matrix> adjacency;  // per layer
  std::vector<Matrix> layer_input;
  std::vector<Matrix> aggregated;  // A^T (Zcat W_gc), per layer
  std::vector<Matrix> pre_act;     // FC output before ReLU
  Matrix last_hidden;
};

/// Per layer: H' = ReLU((A^T (concat(H) W_gc)) W_fc + b); readout H_L w + c.
/// `adjacency` has one N x N matrix per layer, entry (v,u) = edge v -> u.
/// Returns one prediction per (node, slot) in WindowBatch row order.
Vector stgc_forward(const StgcModel& model, const WindowBatch& batch,
                    const std::vector<Matrix>& adjacency, ForwardCache* cache = nullptr);

/// Exact gradient of sum_r adjoint(r) * pred(r) with respect to every
/// parameter, as a flat vector. The cache must come from a forward on the
/// model's current parameters, otherwise ErrorKind::contract.
Vector stgc_backward(const StgcModel& model, const ForwardCache& cache, const Vector& adjoint);

/// Mean |pred - target| over `cells` (row indices). When `adjoint` is given
/// it receives d loss / d pred, using sign(0) = 0.
double mae_loss(const Vector& pred, const Vector& target, const std::vector<Eigen::Index>& cells,
                Vector* adjoint = nullptr);

struct TrainerConfig {
  double learning_rate = 1e-4;
  double clip_threshold = 1.0;
  int max_epochs = 300;
  int patience = 50;
  int batch_size = 32;
  double mask_fraction = 0.25;
  std::uint64_t seed = 42;

  void validate() const;
};

struct AdamState {
  Vector m;
  Vector v;
  long step = 0;
};

struct AdamStepInfo {
  double grad_norm = 0.0;  // before clipping
  bool clipped = false;
};

/// Global-norm clip to `clip` (skipped when clip <= 0), then Adam with
/// beta1 0.9, beta2 0.999, eps 1e-8 and bias correction. A non-finite
/// gradient throws ErrorKind::training_abort naming the tensor when slots
/// are supplied.
AdamStepInfo adam_step(Vector& params, const Vector& grads, AdamState& state, double lr, double clip,
                       const std::vector<TensorSlot>* slots = nullptr);
AdamStepInfo adam_step(StgcModel& model, const Vector& grads, AdamState& state, double lr, double clip);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_mae = 0.0;
  double wallclock = 0.0;  // seconds since the loop started
  bool improved = false;
};

struct EarlyStopResult {
  int best_epoch = 0;
  double best_val = 0.0;
  int epochs_run = 0;
  std::vector<EpochRecord> history;
};

/// Runs train_fn(epoch) then validate_fn() after every epoch. Keeps the
/// parameters with the strictly lowest validation MAE and stops after
/// `patience` epochs without improvement or at max_epochs. On return the
/// model holds the best snapshot.
EarlyStopResult early_stop_loop(const TrainerConfig& trainer, StgcModel& model,
                                const std::function<double(int)>& train_fn,
                                const std::function<double()>& validate_fn,
                                const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Binary checkpoint: "STGC", u32 version, ModelConfig as five i32, u64
/// parameter count, then the parameters as little-endian f64.
void save_checkpoint(const StgcModel& model, const std::string& path);
/// Throws ErrorKind::checkpoint_not_found when the file is absent.
StgcModel load_checkpoint(const std::string& path);

}  // namespace krig
