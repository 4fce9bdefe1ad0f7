#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "smoothmax/experiment.hpp"

using namespace smoothmax;

namespace {

struct Shared {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;
};

void add_shared(CLI::App* sub, Shared& s, bool config_required) {
  auto* c = sub->add_option("--config", s.config, "experiment config file");
  if (config_required) c->required();
  sub->add_option("--out", s.out, "output directory (overrides output.dir)");
  sub->add_option("--seed", s.seed, "base seed (overrides experiment.seed)");
  sub->add_option("--format", s.format, "metrics format")->check(CLI::IsMember({"csv", "json"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimax solvers against smooth ascent adversaries"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Shared shared;
  const char* names[] = {"grad-check", "smoothness", "solve", "baseline", "profile-gradnorm"};
  const char* help[] = {"compare analytic gradients with central differences",
                        "estimate adversary Lipschitz constants against their certificates",
                        "run the SGD or proximal solver on the surrogate objective",
                        "run a gradient descent-ascent baseline",
                        "total-gradient norm as a function of the ascent depth T"};
  for (int i = 0; i < 5; ++i) {
    auto* sub = app.add_subcommand(names[i], help[i]);
    add_shared(sub, shared, std::string(names[i]) != "grad-check");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  RunOptions opts;
  opts.command = command;
  opts.out_dir = shared.out;
  opts.seed = shared.seed;
  opts.format = shared.format;
  opts.log = &std::cerr;

  if (command == "grad-check" && shared.config.empty()) return run_builtin_grad_checks(opts);

  ExperimentConfig cfg;
  try {
    cfg = load_config(shared.config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  return run_experiment(cfg, opts);
}
