#include "krig/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace krig {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Reads keys from one config object and rejects whatever it did not read.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    require(doc_.is_object(), ErrorKind::config, "config section '" + path_ + "' must be an object");
  }

  const json* find(const char* key) {
    used_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  void number(const char* key, double& out) {
    if (const json* v = find(key)) {
      expect(v->is_number(), key, "a number");
      out = v->get<double>();
    }
  }
  void integer(const char* key, int& out) {
    if (const json* v = find(key)) {
      expect(v->is_number_integer(), key, "an integer");
      out = v->get<int>();
    }
  }
  void seed(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      expect(v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0), key,
             "a nonnegative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void boolean(const char* key, bool& out) {
    if (const json* v = find(key)) {
      expect(v->is_boolean(), key, "a boolean");
      out = v->get<bool>();
    }
  }
  void string(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      expect(v->is_string(), key, "a string");
      out = v->get<std::string>();
    }
  }
  template <class F>
  void string_as(const char* key, F&& parse) {
    std::string s;
    if (find(key)) {
      string(key, s);
      parse(s);
    }
  }
  void triple(const char* key, std::array<double, 3>& out) {
    if (const json* v = find(key)) {
      expect(v->is_array() && v->size() == 3, key, "an array of 3 numbers");
      for (std::size_t i = 0; i < 3; ++i) {
        expect((*v)[i].is_number(), key, "an array of 3 numbers");
        out[i] = (*v)[i].get<double>();
      }
    }
  }
  void numbers(const char* key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      expect(v->is_array() && !v->empty(), key, "a nonempty array of numbers");
      out.clear();
      for (const json& x : *v) {
        expect(x.is_number(), key, "a nonempty array of numbers");
        out.push_back(x.get<double>());
      }
    }
  }
  void strings(const char* key, std::vector<std::string>& out) {
    if (const json* v = find(key)) {
      expect(v->is_array(), key, "an array of strings");
      out.clear();
      for (const json& x : *v) {
        expect(x.is_string(), key, "an array of strings");
        out.push_back(x.get<std::string>());
      }
    }
  }
  /// Number, or the named rule string; `rule_hit` reports which.
  void number_or_rule(const char* key, const char* rule, double& out, bool& rule_hit) {
    if (const json* v = find(key)) {
      if (v->is_string()) {
        require(v->get<std::string>() == rule, ErrorKind::config,
                where(key) + " must be a number or \"" + rule + "\"");
        rule_hit = true;
      } else {
        expect(v->is_number(), key, std::string("a number or \"") + rule + "\"");
        out = v->get<double>();
        rule_hit = false;
      }
    }
  }

  void finish() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it)
      require(used_.count(it.key()) > 0, ErrorKind::config, "unknown config key '" + where(it.key().c_str()) + "'");
  }

 private:
  std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  void expect(bool ok, const char* key, const std::string& what) const {
    require(ok, ErrorKind::config, "config key '" + where(key) + "' must be " + what);
  }

  const json& doc_;
  std::string path_;
  std::set<std::string> used_;
};

template <class F>
void with_section(Section& parent, const char* key, F&& body) {
  if (const json* v = parent.find(key)) {
    Section s(*v, key);
    body(s);
    s.finish();
  }
}

const char* node_split_mode_name(NodeSplitMode m) {
  return m == NodeSplitMode::fixed_ratios ? "fixed-ratios" : "missing-ratio";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
  out << text;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, path.string() + ": " + e.what());
  }
}

std::string fmt_g17(double x) {
  if (std::isnan(x)) return "NaN";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"drik", "m0", "m1", "m2", "m3", "m4", "m5",
                                          "m6",   "m7", "mean", "knn", "okriging"};
  return m;
}

json normalizer_to_json(const Normalizer& n) {
  return {{"kind", normalizer_kind_name(n.kind)}, {"offset", n.offset}, {"scale", n.scale}};
}

Normalizer normalizer_from_json(const json& j) {
  try {
    Normalizer n;
    n.kind = parse_normalizer_kind(j.at("kind").get<std::string>());
    n.offset = j.at("offset").get<std::vector<double>>();
    n.scale = j.at("scale").get<std::vector<double>>();
    return n;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("malformed normalizer in checkpoint metadata: ") + e.what());
  }
}

}  // namespace

std::array<double, 3> ExperimentConfig::effective_node_ratios() const {
  if (node_split_mode == NodeSplitMode::fixed_ratios) return split.node_ratios;
  require(missing_ratio > 0.0 && missing_ratio < 1.0, ErrorKind::config, "split.missing_ratio must lie in (0, 1)");
  const double observed = 1.0 - missing_ratio;
  return {0.75 * observed, 0.25 * observed, missing_ratio};
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  Section root(doc, "");
  with_section(root, "dataset", [&](Section& s) {
    s.string("path", c.dataset_path);
    s.string_as("format", [&](const std::string& v) { c.dataset_format = parse_field_format(v); });
    s.string_as("normalizer", [&](const std::string& v) { c.normalizer = parse_normalizer_kind(v); });
  });
  with_section(root, "synth", [&](Section& s) {
    s.integer("n_nodes", c.synth.n_nodes);
    s.integer("n_steps", c.synth.n_steps);
    s.number("length_scale", c.synth.length_scale);
    s.number("temporal_rho", c.synth.temporal_rho);
    s.number("noise_std", c.synth.noise_std);
    s.seed("seed", c.synth.seed);
  });
  with_section(root, "split", [&](Section& s) {
    s.string_as("scheme", [&](const std::string& v) { c.split.scheme = parse_scheme(v); });
    s.triple("node_ratios", c.split.node_ratios);
    s.triple("period_ratios", c.split.period_ratios);
    s.seed("seed", c.split.seed);
    s.string_as("temporal_mode", [&](const std::string& v) { c.split.temporal_mode = parse_temporal_mode(v); });
    s.string_as("node_split_mode", [&](const std::string& v) {
      if (v == "fixed-ratios") c.node_split_mode = NodeSplitMode::fixed_ratios;
      else if (v == "missing-ratio") c.node_split_mode = NodeSplitMode::missing_ratio;
      else throw Error(ErrorKind::config, "unknown split.node_split_mode '" + v + "'");
    });
    s.number("missing_ratio", c.missing_ratio);
  });
  with_section(root, "graph", [&](Section& s) {
    s.string_as("kind", [&](const std::string& v) { c.graph.kind = parse_graph_kind(v); });
    s.integer("k", c.graph.k);
    bool rule = true;
    s.number_or_rule("sigma", "pairwise-std", c.graph.sigma, rule);
    c.graph.sigma_rule = rule ? SigmaRule::pairwise_std : SigmaRule::explicit_value;
    rule = true;
    s.number_or_rule("delta", "median", c.graph.delta, rule);
    c.graph.delta_rule = rule ? DeltaRule::median : DeltaRule::explicit_value;
  });
  with_section(root, "model", [&](Section& s) {
    s.integer("n_layers", c.model.n_layers);
    s.integer("temporal_halfwidth", c.model.temporal_halfwidth);
    s.integer("hidden_dim", c.model.hidden_dim);
    s.integer("window_size", c.model.window_size);
  });
  with_section(root, "trainer", [&](Section& s) {
    s.number("learning_rate", c.trainer.learning_rate);
    s.number("clip_threshold", c.trainer.clip_threshold);
    s.integer("max_epochs", c.trainer.max_epochs);
    s.integer("patience", c.trainer.patience);
    s.integer("batch_size", c.trainer.batch_size);
    s.number("mask_fraction", c.trainer.mask_fraction);
    s.seed("seed", c.trainer.seed);
  });
  with_section(root, "drik", [&](Section& s) {
    s.boolean("enable_np", c.drik.enable_np);
    s.boolean("enable_ed", c.drik.enable_ed);
    s.boolean("enable_sa", c.drik.enable_sa);
    s.integer("perturb_every", c.drik.perturb_every);
  });
  with_section(root, "baselines", [&](Section& s) {
    s.strings("methods", c.baseline_methods);
    s.integer("knn_k", c.knn_k);
    with_section(s, "okriging", [&](Section& o) {
      bool rule = c.kernel.length_scale <= 0.0;
      o.number_or_rule("length_scale", "pairwise-std", c.kernel.length_scale, rule);
      if (rule) c.kernel.length_scale = 0.0;
      o.number("nugget", c.kernel.nugget);
      o.boolean("center", c.kernel.center);
    });
  });
  with_section(root, "shift", [&](Section& s) {
    s.string_as("phase", [&](const std::string& v) { c.shift_phase = parse_phase(v); });
  });
  with_section(root, "sweep", [&](Section& s) {
    s.numbers("ratios", c.sweep_ratios);
    s.strings("methods", c.sweep_methods);
  });
  with_section(root, "output", [&](Section& s) {
    s.string("dir", c.output_dir);
    s.number("mape_floor", c.mape_floor);
  });
  root.finish();

  c.drik.mask_fraction = c.trainer.mask_fraction;
  c.drik.graph = c.graph;
  c.model.validate();
  c.trainer.validate();
  c.drik.validate();
  for (const auto& m : c.baseline_methods)
    require(is_baseline_method(m), ErrorKind::config, "baselines.methods: unknown baseline '" + m + "'");
  for (const auto& m : c.sweep_methods)
    require(is_baseline_method(m) || is_model_method(m), ErrorKind::config, "sweep.methods: unknown method '" + m + "'");
  for (double r : c.sweep_ratios)
    require(r > 0.0 && r < 1.0, ErrorKind::config, "sweep.ratios must lie in (0, 1)");
  require(c.knn_k >= 1, ErrorKind::config, "baselines.knn_k must be positive");
  require(c.graph.k >= 1, ErrorKind::config, "graph.k must be positive");
  require(!c.output_dir.empty(), ErrorKind::config, "output.dir must not be empty");
  c.effective_node_ratios();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, path + ": " + e.what());
  }
  return config_from_json(doc);
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["dataset"] = {{"path", c.dataset_path},
                  {"format", field_format_name(c.dataset_format)},
                  {"normalizer", normalizer_kind_name(c.normalizer)}};
  j["synth"] = {{"n_nodes", c.synth.n_nodes},       {"n_steps", c.synth.n_steps},
                {"length_scale", c.synth.length_scale}, {"temporal_rho", c.synth.temporal_rho},
                {"noise_std", c.synth.noise_std},   {"seed", c.synth.seed}};
  j["split"] = {{"scheme", scheme_name(c.split.scheme)},
                {"node_ratios", c.split.node_ratios},
                {"period_ratios", c.split.period_ratios},
                {"seed", c.split.seed},
                {"temporal_mode", temporal_mode_name(c.split.temporal_mode)},
                {"node_split_mode", node_split_mode_name(c.node_split_mode)},
                {"missing_ratio", c.missing_ratio}};
  j["graph"] = {{"kind", graph_kind_name(c.graph.kind)},
                {"k", c.graph.k},
                {"sigma", c.graph.sigma_rule == SigmaRule::pairwise_std ? json("pairwise-std") : json(c.graph.sigma)},
                {"delta", c.graph.delta_rule == DeltaRule::median ? json("median") : json(c.graph.delta)}};
  j["model"] = {{"n_layers", c.model.n_layers},
                {"temporal_halfwidth", c.model.temporal_halfwidth},
                {"hidden_dim", c.model.hidden_dim},
                {"window_size", c.model.window_size}};
  j["trainer"] = {{"learning_rate", c.trainer.learning_rate}, {"clip_threshold", c.trainer.clip_threshold},
                  {"max_epochs", c.trainer.max_epochs},       {"patience", c.trainer.patience},
                  {"batch_size", c.trainer.batch_size},       {"mask_fraction", c.trainer.mask_fraction},
                  {"seed", c.trainer.seed}};
  j["drik"] = {{"enable_np", c.drik.enable_np},
               {"enable_ed", c.drik.enable_ed},
               {"enable_sa", c.drik.enable_sa},
               {"perturb_every", c.drik.perturb_every}};
  j["baselines"] = {
      {"methods", c.baseline_methods},
      {"knn_k", c.knn_k},
      {"okriging",
       {{"length_scale", c.kernel.length_scale > 0.0 ? json(c.kernel.length_scale) : json("pairwise-std")},
        {"nugget", c.kernel.nugget},
        {"center", c.kernel.center}}}};
  j["shift"] = {{"phase", phase_name(c.shift_phase)}};
  j["sweep"] = {{"ratios", c.sweep_ratios}, {"methods", c.sweep_methods}};
  j["output"] = {{"dir", c.output_dir}, {"mape_floor", c.mape_floor}};
  return j;
}

std::string config_hash(const ExperimentConfig& c) {
  json j = config_to_json(c);
  j["output"].erase("dir");
  return fnv1a_hex(j.dump());
}

bool is_model_method(const std::string& method) {
  try {
    parse_ablation(method);
    return true;
  } catch (const Error&) {
    return false;
  }
}

bool is_baseline_method(const std::string& method) {
  return method == "mean" || method == "knn" || method == "okriging";
}

Experiment::Experiment(ExperimentConfig config) : config_(std::move(config)) {}

const SensorField& Experiment::field() {
  if (!field_) {
    field_ = config_.dataset_path.empty() ? synth_gp_field(config_.synth)
                                          : load_field(config_.dataset_path, config_.dataset_format);
    field_->validate();
  }
  return *field_;
}

std::string Experiment::method_dir(const std::string& method) const {
  return (fs::path(config_.output_dir) / method).string();
}

SplitPlan Experiment::plan() {
  const fs::path path = fs::path(config_.output_dir) / "split.txt";
  const SensorField& f = field();
  if (fs::exists(path)) {
    SplitPlan p = read_split(path.string());
    require(static_cast<int>(p.node_roles.size()) == f.n_nodes() &&
                static_cast<int>(p.period_roles.size()) == f.n_steps(),
            ErrorKind::shape, path.string() + " does not match the dataset shape");
    return p;
  }
  SplitConfig sc = config_.split;
  sc.node_ratios = config_.effective_node_ratios();
  SplitPlan p = make_split(f, sc);
  fs::create_directories(config_.output_dir);
  write_split(p, path.string());
  return p;
}

json Experiment::split() {
  const fs::path path = fs::path(config_.output_dir) / "split.txt";
  if (fs::exists(path)) fs::remove(path);
  const SplitPlan p = plan();
  json j = {{"command", "split"}, {"path", path.string()}, {"scheme", scheme_name(p.scheme)}};
  for (Role r : {Role::train, Role::val, Role::test}) {
    j["nodes"][role_name(r)] = p.nodes_with(r).size();
    j["steps"][role_name(r)] = total_steps(p.periods_with(r));
  }
  return j;
}

json Experiment::train(const std::string& method) {
  require(is_model_method(method), ErrorKind::config, "train: '" + method + "' is not a model method");
  const SplitPlan p = plan();
  DrikConfig dc = ablation_config(parse_ablation(method), config_.drik);
  const fs::path dir = method_dir(method);
  fs::create_directories(dir);

  log_.clear();
  std::ofstream epochs(dir / "epochs.jsonl", std::ios::binary);
  require(static_cast<bool>(epochs), ErrorKind::io, "cannot write " + (dir / "epochs.jsonl").string());
  TrainOptions opts;
  opts.on_epoch = [&](const EpochRecord& r) {
    epochs << json{{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_mae", r.val_mae}, {"wallclock", r.wallclock}}
                  .dump()
           << '\n';
    epochs.flush();
  };
  const FieldReader reader(field(), &log_, Phase::train);
  TrainResult res = train_drik(reader, p, config_.model, config_.trainer, dc, config_.normalizer, opts);

  save_checkpoint(res.model, (dir / "checkpoint.stgc").string());
  const std::string hash = config_hash(config_);
  json meta = {{"method", method},
               {"epoch", res.history.best_epoch},
               {"val_mae", res.history.best_val},
               {"epochs_run", res.history.epochs_run},
               {"seed", config_.trainer.seed},
               {"config_hash", hash},
               {"normalizer", normalizer_to_json(res.normalizer)}};
  write_text(dir / "checkpoint.json", meta.dump(2) + "\n");

  const AuditVerdict audit = audit_leakage(p, log_.records());
  json reads = json::object();
  for (Phase ph : {Phase::train, Phase::validate, Phase::test})
    reads[phase_name(ph)] = {{"value_cells", audit.reads[static_cast<std::size_t>(ph)].value_cells},
                             {"coordinate_reads", audit.reads[static_cast<std::size_t>(ph)].coordinate_reads}};
  write_text(dir / "audit_train.json", json{{"pass", audit.pass},
                                            {"violation_count", audit.violation_count},
                                            {"violations", audit.violations},
                                            {"reads", reads},
                                            {"config_hash", hash}}
                                           .dump(2) +
                                           "\n");
  return {{"command", "train"},       {"method", method},
          {"best_epoch", res.history.best_epoch}, {"val_mae", res.history.best_val},
          {"epochs_run", res.history.epochs_run}, {"audit_pass", audit.pass}};
}

json Experiment::write_predictions(const std::string& method, Phase phase, const KrigePrediction& pred,
                                   const Normalizer& normalizer) {
  const fs::path dir = method_dir(method);
  fs::create_directories(dir);
  const FieldReader reader(field(), &log_, phase);
  const BlockValues truth = read_block(reader, pred.target_ids, pred.periods);

  std::vector<int> steps;
  for (const StepRange& r : pred.periods)
    for (int t = r.begin; t < r.end; ++t) steps.push_back(t);
  Matrix denorm = pred.normalized;
  BoolMatrix cells(truth.observed.rows(), truth.observed.cols());
  std::ostringstream norm_csv, den_csv;
  norm_csv << "node_id,timestep,prediction,truth\n";
  den_csv << "node_id,timestep,prediction,truth\n";
  std::size_t unpredicted = 0;
  for (Eigen::Index i = 0; i < denorm.rows(); ++i) {
    const int node = pred.target_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index t = 0; t < denorm.cols(); ++t) {
      const double p = pred.normalized(i, t);
      denorm(i, t) = std::isnan(p) ? p : normalizer.inverse(node, p);
      const bool obs = truth.observed(i, t);
      cells(i, t) = obs && !std::isnan(p);
      if (obs && std::isnan(p)) ++unpredicted;
      const std::string prefix = std::to_string(node) + "," + std::to_string(steps[static_cast<std::size_t>(t)]) + ",";
      norm_csv << prefix << fmt_g17(p) << ',' << (obs ? fmt_g17(normalizer.forward(node, truth.values(i, t))) : "")
               << '\n';
      den_csv << prefix << fmt_g17(denorm(i, t)) << ',' << (obs ? fmt_g17(truth.values(i, t)) : "") << '\n';
    }
  }
  const std::string ph = phase_name(phase);
  write_text(dir / ("predictions_" + ph + ".csv"), norm_csv.str());
  write_text(dir / ("predictions_" + ph + "_denorm.csv"), den_csv.str());

  const MetricReport report = score(denorm, truth.values, cells, phase, config_.mape_floor);
  json metrics = {{"method", method},
                  {"phase", ph},
                  {"config_hash", config_hash(config_)},
                  {"metrics", to_json(report)},
                  {"unpredicted_cells", unpredicted}};
  write_text(dir / ("metrics_" + ph + ".json"), metrics.dump(2) + "\n");
  write_report(phase);
  return metrics;
}

json Experiment::evaluate(const std::string& method, Phase phase) {
  if (is_baseline_method(method)) return baseline(method, phase);
  require(is_model_method(method), ErrorKind::config, "evaluate: unknown method '" + method + "'");
  require(phase != Phase::train, ErrorKind::unsupported_phase, "evaluate runs on the validate or test phase");
  const fs::path dir = method_dir(method);
  const fs::path ckpt = dir / "checkpoint.stgc";
  require(fs::exists(ckpt), ErrorKind::checkpoint_not_found,
          "no checkpoint for method '" + method + "' at " + ckpt.string() + "; run train first");
  const StgcModel model = load_checkpoint(ckpt.string());
  const json meta = read_json_file(dir / "checkpoint.json");
  const Normalizer normalizer = normalizer_from_json(meta.at("normalizer"));
  const SplitPlan p = plan();
  const FieldReader reader(field(), &log_, phase);
  const KrigePrediction pred = krige_predict(model, reader, p, phase, config_.graph, normalizer);
  return write_predictions(method, phase, pred, normalizer);
}

json Experiment::baseline(const std::string& method, Phase phase) {
  require(phase != Phase::train, ErrorKind::unsupported_phase, "baselines run on the validate or test phase");
  std::vector<std::string> methods = method.empty() ? config_.baseline_methods : std::vector<std::string>{method};
  const SplitPlan p = plan();
  const FieldReader train_reader(field(), &log_, Phase::train);
  const Normalizer normalizer = fit_normalizer(train_reader, p.block(Role::train, Role::train), config_.normalizer);
  const FieldReader reader(field(), &log_, phase);
  json out = json::object();
  for (const std::string& m : methods) {
    require(is_baseline_method(m), ErrorKind::config, "baseline: unknown method '" + m + "'");
    KrigePrediction pred = m == "mean" ? mean_baseline(reader, p, phase, normalizer)
                           : m == "knn" ? knn_baseline(reader, p, phase, normalizer, config_.knn_k)
                                        : okriging(reader, p, phase, normalizer, config_.kernel);
    out[m] = write_predictions(m, phase, pred, normalizer);
  }
  return method.empty() ? out : out[method];
}

json Experiment::shift(Phase phase) {
  require(phase != Phase::train, ErrorKind::unsupported_phase, "shift compares against validate or test targets");
  const SplitPlan p = plan();
  const PhaseView view = phase_views(p, phase);
  const FieldReader reader(field(), &log_, phase);
  std::vector<int> ids = view.inputs.nodes;
  ids.insert(ids.end(), view.targets.nodes.begin(), view.targets.nodes.end());
  GraphBuilderParams params = config_.graph;
  if (params.kind == GraphKind::knn_row_normalized)
    params.k = std::min(params.k, static_cast<int>(ids.size()) - 1);
  const SpatialGraph g = build_graph(reader.coords(ids), params, ids);
  const ShiftReport report = shift_report(g, view.inputs.nodes);
  json j = {{"phase", phase_name(phase)}, {"config_hash", config_hash(config_)}, {"report", to_json(report)}};
  fs::create_directories(config_.output_dir);
  write_text(fs::path(config_.output_dir) / "shift.json", j.dump(2) + "\n");
  return j;
}

json Experiment::synth() {
  const SensorField f = synth_gp_field(config_.synth);
  fs::create_directories(config_.output_dir);
  const char* ext = config_.dataset_format == FieldFormat::csv_wide ? "synth.csv" : "synth.bin";
  const fs::path path = fs::path(config_.output_dir) / ext;
  save_field(f, path.string(), config_.dataset_format);
  return {{"command", "synth"}, {"path", path.string()}, {"n_nodes", f.n_nodes()}, {"n_steps", f.n_steps()}};
}

json Experiment::sweep(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("KRIGBENCH_THREADS")) threads = std::atoi(env);
    if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
  const std::size_t n = config_.sweep_ratios.size();
  std::vector<json> rows(n);
  std::vector<std::exception_ptr> errors(n);
  std::mutex next_mutex;
  std::size_t next = 0;

  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(next_mutex);
        if (next >= n) return;
        i = next++;
      }
      try {
        ExperimentConfig sub = config_;
        const double alpha = config_.sweep_ratios[i];
        sub.node_split_mode = NodeSplitMode::missing_ratio;
        sub.missing_ratio = alpha;
        sub.split.seed = config_.split.seed ^ i;
        sub.trainer.seed = config_.trainer.seed ^ i;
        char name[32];
        std::snprintf(name, sizeof name, "alpha_%04d", static_cast<int>(std::lround(alpha * 1000)));
        sub.output_dir = (fs::path(config_.output_dir) / "sweep" / name).string();
        Experiment exp(sub);
        exp.split();
        json per_method = json::object();
        for (const std::string& m : config_.sweep_methods) {
          if (is_model_method(m)) {
            exp.train(m);
            per_method[m] = exp.evaluate(m, Phase::test);
          } else {
            per_method[m] = exp.baseline(m, Phase::test);
          }
        }
        rows[i] = per_method;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int workers = std::min<int>(threads, static_cast<int>(n));
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::ostringstream csv;
  csv << "alpha,method,mae,rmse,mape\n";
  for (std::size_t i = 0; i < n; ++i)
    for (const std::string& m : config_.sweep_methods) {
      const json& metrics = rows[i][m]["metrics"];
      csv << fmt_g17(config_.sweep_ratios[i]) << ',' << m << ',' << fmt_g17(metrics["mae"].get<double>()) << ','
          << fmt_g17(metrics["rmse"].get<double>()) << ','
          << (metrics["mape"].is_null() ? std::string() : fmt_g17(metrics["mape"].get<double>())) << '\n';
    }
  const fs::path dir = fs::path(config_.output_dir) / "sweep";
  fs::create_directories(dir);
  write_text(dir / "sweep.csv", csv.str());
  return {{"command", "sweep"}, {"path", (dir / "sweep.csv").string()}, {"ratios", n},
          {"methods", config_.sweep_methods}};
}

void Experiment::write_report(Phase phase) const {
  const std::string ph = phase_name(phase);
  std::ostringstream md;
  const bool ratio = phase == Phase::test;
  md << "# " << ph << " metrics\n\n| Method | MAE | RMSE | MAPE (%) |" << (ratio ? " Test/Val MAE |" : "") << "\n"
     << "|---|---|---|---|" << (ratio ? "---|" : "") << "\n";
  char buf[64];
  auto cell = [&](const json& v) {
    if (v.is_null()) return std::string("n/a");
    std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
    return std::string(buf);
  };
  for (const std::string& m : known_methods()) {
    const fs::path file = fs::path(config_.output_dir) / m / ("metrics_" + ph + ".json");
    if (!fs::exists(file)) continue;
    const json j = read_json_file(file);
    const json& r = j.at("metrics");
    md << "| " << m << " | " << cell(r.at("mae")) << " | " << cell(r.at("rmse")) << " | " << cell(r.at("mape")) << " |";
    if (ratio) {
      const fs::path val = fs::path(config_.output_dir) / m / "metrics_validate.json";
      std::string q = "n/a";
      if (fs::exists(val)) {
        MetricReport t, v;
        t.mae = r.at("mae").get<double>();
        v.mae = read_json_file(val).at("metrics").at("mae").get<double>();
        if (v.mae > 0.0) q = cell(generalization_ratio(t, v));
      }
      md << ' ' << q << " |";
    }
    md << '\n';
  }
  write_text(fs::path(config_.output_dir) / ("report_" + ph + ".md"), md.str());
}

}  // namespace krig
