#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "smoothmax/problems.hpp"
#include "smoothmax/smoothlab.hpp"
#include "smoothmax/solvers.hpp"

namespace smoothmax {

inline constexpr const char* kVersion = "0.1.0";

using Rows = std::vector<std::vector<double>>;

struct ProblemConfig {
  std::string kind = "dirac_gan";  // dirac_gan | quadratic | mog_gan | adversarial_training
  double radius = 5.0;
  // quadratic
  Rows C{{1.0}};
  double alpha = 1.0;
  Rows Q;  // overrides alpha when non-empty
  // starting points; empty picks a per-problem default
  std::vector<double> x0;
  std::vector<double> y0;
  // mog_gan
  int n_modes = 8;
  double sigma2 = 0.05;
  int latent_dim = 16;
  int batch = 64;
  int n_components = 1024;
  std::vector<int> gen_layers{16, 32, 2};
  std::vector<int> disc_layers{2, 32, 1};
  std::string activation = "softplus";
  std::uint64_t data_seed = 0;
  // adversarial_training (batch and n_components above are shared)
  int n_train = 512;
  int n_test = 2000;
  std::vector<int> net_layers{2, 16, 2};
  int attack_T = 10;
  double attack_step = 0.2;
};

struct AlgorithmConfig {
  std::string kind = "sga";
  double eta = 0.1;
  int T = 10;
  double theta = 1.0;
  double box_lo = -std::numeric_limits<double>::infinity();
  double box_hi = std::numeric_limits<double>::infinity();
  std::string init = "zero";  // zero | uniform:lo:hi | normal:scale | fixed:v1,v2 | default
  bool full_batch = false;
  std::string schedule = "iid";
};

struct SolverSection {
  std::string kind = "sgd";  // sgd | proximal
  long S = 1000;
  double eps = 0.1;
  std::optional<double> eta;
  long record_moreau_every = 25;
  std::string return_rule = "last";
  bool stop_on_fosp = false;
  long stall_window = 0;
  long keep_every = 1;
  std::string gradient = "total";       // total | partial
  std::string components = "schedule";  // schedule | per_sample
  bool frozen = false;                  // one fixed seed: deterministic objective
  std::string inner_method = "prox_linear";
  int inner_budget = 0;
  std::optional<long> max_outer;
  int moreau_budget = 0;
  // overrides for problems without declared constants
  std::optional<double> L_hat;
  std::optional<double> G_hat;
  std::optional<double> B;
};

struct BaselineSection {
  std::string mode = "simultaneous";
  double eta_x = 0.01;
  double eta_y = 0.01;
  long steps = 1000;
  int algorithm = 0;  // toolkit entry used by partial_gradient
};

struct SmoothnessSection {
  int n_pairs = 200;
  std::vector<double> scales{1e-1, 1e-2, 1e-3};
  std::string regime = "auto";
  double slack = 0.01;
  double lo = -1.0;
  double hi = 1.0;
  bool gradient_lipschitz = true;
};

struct ProfileSection {
  std::vector<int> T_values{0, 5, 10, 20};
  int n_points = 5;
  int n_seeds = 1;
  double lo = -1.0;
  double hi = 1.0;
  int algorithm = 0;
};

struct GradCheckSection {
  int n_points = 50;
  double lo = -2.0;
  double hi = 2.0;
  double tol = 1e-5;
};

struct OutputSection {
  std::string dir = "out";
  std::string format = "csv";  // csv | json
  bool timing = false;         // wall_ms columns stay blank unless set
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  std::string command;  // default subcommand, optional
  ProblemConfig problem;
  std::vector<AlgorithmConfig> algorithms;
  SolverSection solver;
  BaselineSection baseline;
  SmoothnessSection smoothness;
  ProfileSection profile;
  GradCheckSection grad_check;
  OutputSection output;
};

/// Parses the key = value format. Throws ConfigError naming the offending key.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig parse_config_string(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Canonical text; every field is written, doubles in shortest round-trip form.
std::string serialize_config(const ExperimentConfig& cfg);
/// FNV-1a 64 of the canonical text with output.dir blanked, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);
bool same_config(const ExperimentConfig& a, const ExperimentConfig& b);

std::uint64_t fnv1a64(const std::string& bytes);

AlgorithmSpec to_spec(const AlgorithmConfig& a);
Initializer parse_initializer(const std::string& s);

struct ProblemInstance {
  std::unique_ptr<MinimaxOracle> oracle;
  Vector x0;
  Vector y0;
  /// Extra CSV columns and their values at x (solver runs) or (x, y) (baselines).
  std::vector<std::string> x_columns;
  std::function<std::vector<double>(const Vector&)> x_values;
  std::vector<std::string> y_columns;
  std::function<std::vector<double>(const Vector&)> y_values;
  /// Random (x, y) for gradient checks.
  std::function<std::pair<Vector, Vector>(const Seed&)> sample_point;
  /// End-of-run evaluation written into the summary (name, value).
  std::function<std::vector<std::pair<std::string, double>>(const Vector&)> evaluate;
};

ProblemInstance build_problem(const ExperimentConfig& cfg);
Toolkit build_toolkit(const ExperimentConfig& cfg);

struct RunOptions {
  std::string command;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;
  std::ostream* log = nullptr;  // diagnostics
};

/// Executes one subcommand and writes metrics and summary.json into the output
/// directory. Returns the process exit code: 0 success, 2 configuration error,
/// 3 numeric failure (including a failed gradient check).
int run_experiment(const ExperimentConfig& cfg, const RunOptions& opts);

/// grad-check over the built-in problems with default parameters.
int run_builtin_grad_checks(const RunOptions& opts);

}  // namespace smoothmax
