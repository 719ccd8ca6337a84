#pragma once

#include "krig/access.hpp"
#include "krig/dataio.hpp"
#include "krig/geometry.hpp"
#include "krig/graph.hpp"
#include "krig/model.hpp"
#include "krig/splits.hpp"

#include <functional>
#include <string>
#include <vector>

namespace krig {

struct DrikConfig {
  bool enable_np = true;  // node perturbation
  bool enable_ed = true;  // layer-scheduled edge dropping
  bool enable_sa = true;  // subgraph addition over validation topology
  double mask_fraction = 0.25;
  GraphBuilderParams graph;
  int perturb_every = 1;

  void validate() const;
};

/// Ablation index 0..7 in the order none, NP, ED, SA, NP+ED, NP+SA, ED+SA,
/// all. Returns `base` with the three switches overwritten.
DrikConfig ablation_config(int index, DrikConfig base);
/// "drik" -> 7, "m0".."m7" -> index; anything else is a config error.
int parse_ablation(const std::string& method);

/// Masked training positions of one iteration. pass_of[v] is 0 (unmasked),
/// 1 or 2 for every training position v.
struct PassPlan {
  std::vector<int> m1;
  std::vector<int> m2;
  std::vector<int> pass_of;
};

/// Draws M1 (and M2 from the rest when `two_pass`) uniformly without
/// replacement, each of size max(1, round(fraction * n_train)). Throws
/// ErrorKind::degenerate_batch when no unmasked training node would remain.
PassPlan sample_pass_plan(int n_train, double fraction, bool two_pass, Rng& rng);

/// Perturbation domains from the out-neighbors of each node in `graph`
/// (the nearest node for an isolated row).
std::vector<NodeDomain> perturbation_domains(const SpatialGraph& graph);

struct PerturbedGraph {
  Coords coords;
  Matrix adjacency;
};

/// Resamples every node inside its domain and rebuilds the adjacency with
/// `resolved` (explicit sigma / delta) parameters.
PerturbedGraph perturb_and_rebuild(const std::vector<NodeDomain>& domains,
                                   const GraphBuilderParams& resolved, Rng& rng);

/// In-memory training inputs: normalized training-period values of the
/// training nodes (zero where unobserved) plus validation-node coordinates.
struct TrainingData {
  std::vector<int> train_ids;
  std::vector<int> val_ids;  // empty unless subgraph addition is enabled
  Coords train_coords;
  Coords val_coords;
  Matrix values;        // n_train x steps, columns are the training runs back to back
  BoolMatrix observed;  // same shape
  std::vector<StepRange> runs;  // runs in local column indices

  int n_train() const { return static_cast<int>(train_ids.size()); }
  int n_val() const { return static_cast<int>(val_ids.size()); }
  int n_union() const { return n_train() + n_val(); }
};

/// Reads training-node values over the training period, and validation-
/// node coordinates only when `with_val_topology`.
TrainingData load_training_data(const FieldReader& reader, const SplitPlan& plan,
                                const Normalizer& normalizer, bool with_val_topology);

/// Shuffled windows of at most `window` steps tiling every run, each run
/// starting at a random offset so window boundaries move between epochs.
std::vector<StepRange> epoch_windows(const std::vector<StepRange>& runs, int window, Rng& rng);

struct DrikLoss {
  double loss = 0.0;
  std::size_t cells = 0;
  Vector grad;        // empty unless requested
  Vector frozen_val;  // pass-1 validation predictions, one per (val node, slot)
};

/// Two-pass loss on `adjacency` over train then validation positions. Pass 1
/// zero-fills M1 and the validation nodes; pass 2 clamps validation inputs
/// to the frozen pass-1 predictions (or `frozen_override`) and zero-fills
/// M2. Without subgraph addition only pass 1 runs. The loss is the MAE over
/// observed M1 cells of pass 1 and M2 cells of pass 2.
DrikLoss drik_loss(const StgcModel& model, const TrainingData& data, const std::vector<StepRange>& windows,
                   const Matrix& adjacency, const PassPlan& plan, const DrikConfig& cfg, bool with_grad,
                   const Vector* frozen_override = nullptr);

struct DrikState {
  SpatialGraph base_graph;  // unperturbed, resolved parameters
  std::vector<NodeDomain> domains;
  Matrix adjacency;         // current (possibly perturbed)
  AdamState adam;
  long iteration = 0;
};

DrikState make_drik_state(const TrainingData& data, const DrikConfig& cfg);

/// One optimizer step on `windows`: perturb and rebuild when due, sample
/// the pass plan, compute the two-pass loss and gradient, clip, Adam. A
/// batch with no observed masked cell is resampled once, then aborts with
/// ErrorKind::degenerate_batch. Returns the loss.
double drik_iteration(StgcModel& model, DrikState& state, const TrainingData& data,
                      const std::vector<StepRange>& windows, const DrikConfig& cfg,
                      const TrainerConfig& trainer, Rng& rng);

/// Inference inputs: observed values of input nodes and a graph over input
/// then target nodes, for the cells of one phase view.
struct KrigingProblem {
  std::vector<int> input_ids;
  std::vector<int> target_ids;
  std::vector<StepRange> periods;  // absolute steps
  Matrix input_values;             // n_inputs x steps, normalized, zero where unobserved
  Matrix adjacency;
};

KrigingProblem make_kriging_problem(const FieldReader& reader, const PhaseView& view,
                                    const GraphBuilderParams& graph, const Normalizer& normalizer);

/// Normalized predictions, n_targets x steps over the problem's periods.
/// No perturbation and no edge dropping. Pure in (model, problem).
Matrix predict_problem(const StgcModel& model, const KrigingProblem& problem, int batch_windows = 32);

struct KrigePrediction {
  std::vector<int> target_ids;
  std::vector<StepRange> periods;
  Matrix normalized;  // n_targets x steps
};

/// Builds the phase's inference graph and predicts every target cell.
KrigePrediction krige_predict(const StgcModel& model, const FieldReader& reader, const SplitPlan& plan,
                              Phase phase, const GraphBuilderParams& graph, const Normalizer& normalizer);

struct TrainOptions {
  /// Which view drives model selection. Anything but validate is a protocol
  /// violation; the leakage audit exists to catch it.
  Phase selection_view = Phase::validate;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  StgcModel model;
  Normalizer normalizer;
  EarlyStopResult history;
};

/// Full training run: fit the normalizer on training cells, train with DRIK
/// and early stopping on validation MAE in sensor units.
TrainResult train_drik(const FieldReader& reader, const SplitPlan& plan, const ModelConfig& model_cfg,
                       const TrainerConfig& trainer, const DrikConfig& cfg, NormalizerKind normalizer_kind,
                       const TrainOptions& options = {});

/// Mean absolute error in sensor units over observed target cells.
double denormalized_mae(const KrigePrediction& pred, const Normalizer& normalizer, const Matrix& truth,
                        const BoolMatrix& observed);

}  // namespace krig
