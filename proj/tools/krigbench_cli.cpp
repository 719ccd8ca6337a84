// krigbench command-line front end over the C interface.
#include "krigbench/krigbench.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Flags {
  std::string config;
  std::string phase;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string method;
  int threads = 0;
};

int fail(kb_status status) {
  nlohmann::json err = {{"error", kb_status_kind(status)}, {"message", kb_last_error_message()}};
  std::cerr << err.dump() << std::endl;
  return 2;
}

int run(const std::string& command, const Flags& f) {
  kb_experiment* exp = nullptr;
  kb_status st = kb_experiment_from_file(f.config.empty() ? nullptr : f.config.c_str(), &exp);
  if (st != KB_OK) return fail(st);
  auto finish = [&](kb_status s) {
    int code = 0;
    if (s != KB_OK) code = fail(s);
    else std::cout << kb_experiment_result(exp) << std::endl;
    kb_experiment_free(exp);
    return code;
  };
  if (!f.out.empty() && (st = kb_experiment_set_output_dir(exp, f.out.c_str())) != KB_OK) return finish(st);
  if (f.seed && (st = kb_experiment_set_seed(exp, *f.seed)) != KB_OK) return finish(st);
  return finish(kb_experiment_run(exp, command.c_str(), f.method.empty() ? nullptr : f.method.c_str(),
                                  f.phase.empty() ? nullptr : f.phase.c_str(), f.threads));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inductive kriging benchmark: 3x3 splits, DRIK training, baselines, shift diagnostics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kb_version());
  Flags flags;

  const std::pair<const char*, const char*> commands[] = {
      {"split", "Write the spatio-temporal split file"},
      {"train", "Train DRIK or an ablation with early stopping"},
      {"evaluate", "Predict and score a trained model on a phase"},
      {"baseline", "Score the mean, KNN and ordinary kriging baselines"},
      {"shift", "Write distribution-shift diagnostics"},
      {"synth", "Write a synthetic Gaussian-process dataset"},
      {"sweep", "Repeat the pipeline over missing ratios"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "Output directory (overrides output.dir)");
    sub->add_option("--seed", flags.seed, "Seed for the split and the trainer");
    if (std::string(name) != "synth" && std::string(name) != "split")
      sub->add_option("--method", flags.method, "drik, m0..m7, mean, knn or okriging");
    if (std::string(name) == "evaluate" || std::string(name) == "baseline" || std::string(name) == "shift")
      sub->add_option("--phase", flags.phase, "validate or test")->check(CLI::IsMember({"validate", "test"}));
    if (std::string(name) == "sweep")
      sub->add_option("--threads", flags.threads, "Worker cap (default KRIGBENCH_THREADS or core count)");
  }

  CLI11_PARSE(app, argc, argv);
  return run(app.get_subcommands().front()->get_name(), flags);
}
