#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "smoothmax/moreau.hpp"
#include "smoothmax/simplex.hpp"

namespace smoothmax {

enum class ReturnRule { Uniform, Last, Postprocess };
enum class Termination { Budget, FospCertified, Stall, NumericFailure, ToleranceFailure };

std::string to_string(ReturnRule r);
std::string to_string(Termination t);
ReturnRule parse_return_rule(const std::string& s);

struct StepRecord {
  long step = 0;
  double g_sample = 0.0;
  double subgrad_norm = 0.0;
  std::optional<double> moreau_grad_norm;
  double wall_ms = 0.0;
};

using StepCallback = std::function<void(const StepRecord&, const Vector& x)>;

struct SolverConfig {
  /// Steps s = 0..S are executed (S + 1 subgradient evaluations).
  long S = 1000;
  double eps = 0.1;
  /// Step size; sqrt(2B / (L_hat G_hat^2 (S+1))) when unset.
  std::optional<double> eta;
  /// Moreau metering cadence in steps; 0 disables metering.
  long record_moreau_every = 25;
  ReturnRule return_rule = ReturnRule::Uniform;
  /// Stop as soon as a metered point is a certified eps-FOSP.
  bool stop_on_fosp = false;
  /// Consecutive unchanged objective samples that count as a stall; 0 disables.
  long stall_window = 1000;
  double stall_tol = 1e-14;
  /// Keep every n-th iterate in the report (the returned point is always kept).
  long keep_every = 1;
  Seed seed{0, 0, 0};
  MoreauConfig moreau;
  StepCallback on_step;
};

struct SolverReport {
  std::vector<std::pair<long, Vector>> iterates;
  std::vector<StepRecord> records;
  Termination termination = Termination::Budget;
  Vector x_bar;
  long x_bar_step = 0;
  ReturnRule rule = ReturnRule::Uniform;
  double eta = 0.0;
  std::string message;
  /// Final Moreau estimate at x_bar when one was computed.
  std::optional<MoreauEstimate> final_moreau;

  const Vector* iterate_at(long step) const;
};

double auto_step_size(double B, double L_hat, double G_hat, long n_steps);

/// Subgradient method: x_{s+1} = x_s - eta * subgradient(x_s, z_s).
SolverReport sgd_solve(const Objective& g, const Vector& x0, const SolverConfig& config,
                       const WeakConvexityConstants& constants);

// ---- proximal ------------------------------------------------------------------

enum class InnerMethod { ProxLinear, Extragradient };
std::string to_string(InnerMethod m);
InnerMethod parse_inner_method(const std::string& s);

struct InnerResult {
  Vector x;
  double value = 0.0;  // max_i g_i(x) + L_hat ||x - x_s||^2
  double gap = 0.0;    // certified suboptimality
  int iterations = 0;
};

/// Approximately minimises max_i g_i(x) + L_hat ||x - x_s||^2 to additive `tol`.
/// Pieces must be L_hat-weakly convex. Throws ToleranceFailure when the gap is
/// not certified within the budget.
InnerResult inner_prox_solve(const Objective& g, const Vector& x_s, double L_hat, double tol,
                             InnerMethod method = InnerMethod::ProxLinear, int budget = 0);

struct ProximalConfig {
  InnerMethod method = InnerMethod::ProxLinear;
  int inner_budget = 0;
  /// Outer cap; ceil(200 L_hat B / eps^2) when unset.
  std::optional<long> max_outer;
  StepCallback on_step;
};

struct ProximalReport : SolverReport {
  double eps_hat = 0.0;
  long outer_iterations = 0;
  long outer_bound = 0;
  std::vector<double> max_values;  // max_i g_i(x_s) for s = 0..
};

/// Inexact proximal point method on max_i g_i. Uses constants.L_hat_prox.
ProximalReport proximal_solve(const Objective& g, const Vector& x0, double eps,
                              const WeakConvexityConstants& constants, const ProximalConfig& config = {});

// ---- GDA baselines ----------------------------------------------------------------

enum class GdaMode { Simultaneous, Alternating, PartialGradient };
std::string to_string(GdaMode m);
GdaMode parse_gda_mode(const std::string& s);

/// Called once per step with the point (x, y) where the step took its gradients.
using GdaStepCallback = std::function<void(const StepRecord&, const Vector& x, const Vector& y)>;

struct GdaConfig {
  GdaMode mode = GdaMode::Simultaneous;
  double eta_x = 0.01;
  double eta_y = 0.01;
  /// Adversary for partial_gradient mode (T, init, schedule); eta is overridden by eta_y.
  AlgorithmSpec adversary;
  long steps = 1000;
  Seed seed{0, 0, 0};
  GdaStepCallback on_step;
};

struct GdaReport {
  std::vector<Vector> xs;  // x_0..x_steps
  std::vector<Vector> ys;  // y_0..y_steps (adversary output for partial_gradient)
  std::vector<StepRecord> records;
  Termination termination = Termination::Budget;
  std::string message;
};

GdaReport gda_baseline(const MinimaxOracle& oracle, const Vector& x0, const Vector& y0, const GdaConfig& config);

}  // namespace smoothmax
