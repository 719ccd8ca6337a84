#include "krigbench/krigbench.h"

#include "krig/experiment.hpp"

#include <cmath>
#include <exception>
#include <memory>
#include <new>
#include <string>

struct kb_field {
  krig::SensorField field;
};

struct kb_experiment {
  krig::ExperimentConfig config;
  std::unique_ptr<krig::Experiment> exp;
  std::string result = "{}";
  std::string scratch;

  krig::Experiment& get() {
    if (!exp) exp = std::make_unique<krig::Experiment>(config);
    return *exp;
  }
};

namespace {

thread_local std::string g_last_error;

kb_status status_of(krig::ErrorKind kind) {
  switch (kind) {
    case krig::ErrorKind::config: return KB_ERR_CONFIG;
    case krig::ErrorKind::parse: return KB_ERR_PARSE;
    case krig::ErrorKind::shape: return KB_ERR_SHAPE;
    case krig::ErrorKind::io: return KB_ERR_IO;
    case krig::ErrorKind::degenerate_scale: return KB_ERR_DEGENERATE_SCALE;
    case krig::ErrorKind::numerical: return KB_ERR_NUMERICAL;
    case krig::ErrorKind::unsupported_phase: return KB_ERR_UNSUPPORTED_PHASE;
    case krig::ErrorKind::degenerate_batch: return KB_ERR_DEGENERATE_BATCH;
    case krig::ErrorKind::training_abort: return KB_ERR_TRAINING_ABORT;
    case krig::ErrorKind::contract: return KB_ERR_CONTRACT;
    case krig::ErrorKind::undefined_ratio: return KB_ERR_UNDEFINED_RATIO;
    case krig::ErrorKind::checkpoint_not_found: return KB_ERR_CHECKPOINT_NOT_FOUND;
  }
  return KB_ERR_INTERNAL;
}

template <class F>
kb_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return KB_OK;
  } catch (const krig::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return KB_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return KB_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return KB_ERR_INTERNAL;
  }
}

kb_status invalid(const char* what) {
  g_last_error = what;
  return KB_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* kb_version(void) { return "1.0.0"; }

const char* kb_status_kind(kb_status status) {
  switch (status) {
    case KB_OK: return "ok";
    case KB_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case KB_ERR_INTERNAL: return "internal";
    default: break;
  }
  if (status > KB_OK && status <= KB_ERR_CHECKPOINT_NOT_FOUND)
    return krig::error_kind_name(static_cast<krig::ErrorKind>(status - 1));
  return "unknown";
}

const char* kb_last_error_message(void) { return g_last_error.c_str(); }

kb_status kb_field_load(const char* path, const char* format, kb_field** out) {
  if (!path || !format || !out) return invalid("kb_field_load: null argument");
  return guarded([&] {
    auto f = std::make_unique<kb_field>();
    f->field = krig::load_field(path, krig::parse_field_format(format));
    f->field.validate();
    *out = f.release();
  });
}

kb_status kb_field_synth(int n_nodes, int n_steps, double length_scale, double temporal_rho, double noise_std,
                         uint64_t seed, kb_field** out) {
  if (!out) return invalid("kb_field_synth: null output");
  return guarded([&] {
    auto f = std::make_unique<kb_field>();
    f->field = krig::synth_gp_field({n_nodes, n_steps, length_scale, temporal_rho, noise_std, seed});
    *out = f.release();
  });
}

kb_status kb_field_save(const kb_field* field, const char* path, const char* format) {
  if (!field || !path || !format) return invalid("kb_field_save: null argument");
  return guarded([&] { krig::save_field(field->field, path, krig::parse_field_format(format)); });
}

int kb_field_n_nodes(const kb_field* field) { return field ? field->field.n_nodes() : 0; }
int kb_field_n_steps(const kb_field* field) { return field ? field->field.n_steps() : 0; }

kb_status kb_field_value(const kb_field* field, int node, int step, double* value, int* observed) {
  if (!field || !value) return invalid("kb_field_value: null argument");
  if (node < 0 || node >= field->field.n_nodes() || step < 0 || step >= field->field.n_steps())
    return invalid("kb_field_value: index out of range");
  const bool obs = field->field.mask(node, step);
  *value = obs ? field->field.values(node, step) : std::nan("");
  if (observed) *observed = obs ? 1 : 0;
  return KB_OK;
}

kb_status kb_field_coord(const kb_field* field, int node, double* x, double* y) {
  if (!field || !x || !y) return invalid("kb_field_coord: null argument");
  if (node < 0 || node >= field->field.n_nodes()) return invalid("kb_field_coord: node out of range");
  *x = field->field.coords[static_cast<std::size_t>(node)].x;
  *y = field->field.coords[static_cast<std::size_t>(node)].y;
  return KB_OK;
}

void kb_field_free(kb_field* field) { delete field; }

kb_status kb_experiment_from_file(const char* config_path, kb_experiment** out) {
  if (!out) return invalid("kb_experiment_from_file: null output");
  return guarded([&] {
    auto e = std::make_unique<kb_experiment>();
    e->config = config_path ? krig::load_config(config_path) : krig::config_from_json(nlohmann::json::object());
    *out = e.release();
  });
}

kb_status kb_experiment_from_json(const char* json_text, kb_experiment** out) {
  if (!json_text || !out) return invalid("kb_experiment_from_json: null argument");
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json_text, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& err) {
      throw krig::Error(krig::ErrorKind::parse, err.what());
    }
    auto e = std::make_unique<kb_experiment>();
    e->config = krig::config_from_json(doc);
    *out = e.release();
  });
}

kb_status kb_experiment_set_output_dir(kb_experiment* exp, const char* dir) {
  if (!exp || !dir || !*dir) return invalid("kb_experiment_set_output_dir: empty argument");
  exp->config.output_dir = dir;
  exp->exp.reset();
  return KB_OK;
}

kb_status kb_experiment_set_seed(kb_experiment* exp, uint64_t seed) {
  if (!exp) return invalid("kb_experiment_set_seed: null handle");
  exp->config.split.seed = seed;
  exp->config.trainer.seed = seed;
  exp->exp.reset();
  return KB_OK;
}

const char* kb_experiment_config_json(kb_experiment* exp) {
  if (!exp) return "";
  exp->scratch = krig::config_to_json(exp->config).dump(2);
  return exp->scratch.c_str();
}

const char* kb_experiment_config_hash(kb_experiment* exp) {
  if (!exp) return "";
  exp->scratch = krig::config_hash(exp->config);
  return exp->scratch.c_str();
}

kb_status kb_experiment_run(kb_experiment* exp, const char* command, const char* method, const char* phase,
                            int threads) {
  if (!exp || !command) return invalid("kb_experiment_run: null argument");
  return guarded([&] {
    const std::string cmd = command;
    const std::string m = method ? method : "";
    krig::Experiment& e = exp->get();
    const krig::Phase ph = phase ? krig::parse_phase(phase)
                                 : (cmd == "shift" ? exp->config.shift_phase : krig::Phase::test);
    nlohmann::json r;
    if (cmd == "split") r = e.split();
    else if (cmd == "train") r = e.train(m.empty() ? "drik" : m);
    else if (cmd == "evaluate") r = e.evaluate(m.empty() ? "drik" : m, ph);
    else if (cmd == "baseline") r = e.baseline(m, ph);
    else if (cmd == "shift") r = e.shift(ph);
    else if (cmd == "synth") r = e.synth();
    else if (cmd == "sweep") r = e.sweep(threads);
    else throw krig::Error(krig::ErrorKind::config, "unknown command '" + cmd + "'");
    exp->result = r.dump();
  });
}

const char* kb_experiment_result(kb_experiment* exp) { return exp ? exp->result.c_str() : ""; }

void kb_experiment_free(kb_experiment* exp) { delete exp; }

}  // extern "C"
