#pragma once

#include "krig/drik.hpp"

namespace krig {

/// Squared-exponential kernel k(d) = exp(-d^2 / length_scale^2).
struct GpKernelSpec {
  double length_scale = 0.0;  // <= 0: population std of pairwise distances over inputs and targets
  double nugget = 1e-6;       // normalized-variance units
  bool center = true;         // per-timestep de-mean / re-mean
};

/// All baselines work on normalized values of the phase's input cells and
/// return normalized predictions in the same layout as krige_predict. Cells
/// without a prediction (no observed input at that step) hold NaN.
KrigePrediction mean_baseline(const FieldReader& reader, const SplitPlan& plan, Phase phase,
                              const Normalizer& normalizer);

/// Unweighted mean over the k nearest input nodes observed at the step.
/// Throws ErrorKind::config when k exceeds the input count.
KrigePrediction knn_baseline(const FieldReader& reader, const SplitPlan& plan, Phase phase,
                             const Normalizer& normalizer, int k = 10);

/// GP conditional mean K_uo (K_oo + nugget I)^{-1} x_o per step, by
/// Cholesky solves. Steps sharing an observed-input pattern share one
/// factorization.
KrigePrediction okriging(const FieldReader& reader, const SplitPlan& plan, Phase phase,
                         const Normalizer& normalizer, const GpKernelSpec& kernel = {});

/// Same, on explicit inputs: x_obs is n_inputs x steps with NaN for
/// unobserved cells. Returns n_targets x steps.
Matrix gp_conditional_mean(const Coords& inputs, const Coords& targets, const Matrix& x_obs,
                           const GpKernelSpec& kernel);

}  // namespace krig
