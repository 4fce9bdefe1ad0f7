#pragma once

#include <optional>

#include "smoothmax/gradient.hpp"

namespace smoothmax {

enum class MoreauMode { Deterministic, Stochastic };
enum class Certification { Certified, Probabilistic, NotCertified };

std::string to_string(MoreauMode m);
std::string to_string(Certification c);
MoreauMode parse_moreau_mode(const std::string& s);

struct MoreauConfig {
  /// Envelope parameter; 1/(2 L_hat) when unset.
  std::optional<double> lambda;
  double eps = 1e-2;
  /// Inner iteration cap; 0 selects the rate-based default.
  int inner_budget = 0;
  MoreauMode mode = MoreauMode::Deterministic;
  /// Subgradient bound G_hat; confines stochastic iterates to a ball of radius lambda * G_hat.
  std::optional<double> subgradient_bound;
  /// Suboptimality target; eps^2 / (4 L_hat) when unset.
  std::optional<double> gap_target;
  /// Starting curvature for the prox-linear majorant; L_hat when unset.
  std::optional<double> curvature_guess;
  /// Extra prox-linear steps after the gap is certified; stops early once steps stall.
  int polish = 0;
  /// Randomness for stochastic mode.
  Seed seed{0, 7, 0};
  int value_samples = 16;
  int stochastic_cap = 20000;
};

struct MoreauEstimate {
  Vector x;
  Vector x_hat;
  double lambda = 0.0;
  double envelope_value = 0.0;
  Vector gradient;  // (x - x_hat) / lambda
  /// Certified (deterministic) or heuristic (stochastic) bound on the inner suboptimality.
  double inner_residual = 0.0;
  /// Bound on ||gradient - true envelope gradient|| implied by inner_residual.
  double gradient_error = 0.0;
  Certification certification = Certification::NotCertified;
  int iterations = 0;

  double gradient_norm() const { return gradient.norm(); }
};

/// Minimiser of phi(x') = g(x') + ||x' - center||^2 / (2 lambda) for a deterministic
/// max of smooth pieces that are each L_w-weakly convex (lambda < 1/L_w).
struct ProxSolve {
  Vector x;
  double value = 0.0;        // phi(x)
  double lower_bound = 0.0;  // certified lower bound on min phi
  int iterations = 0;
  bool certified = false;
};

ProxSolve prox_minimize(const Objective& g, const Vector& center, double lambda, double L_w, double gap_target,
                        int budget, std::optional<double> curvature_guess = std::nullopt, int polish = 0);

/// Certified lower bound on min phi from first-order information of the pieces at z.
double prox_lower_bound(const std::vector<ValueGrad>& pieces_at_z, const Vector& z, const Vector& center,
                        double lambda, double L_w, Vector* weights = nullptr);

MoreauEstimate moreau_estimate(const Objective& g, const Vector& x, const MoreauConfig& config, double L_hat);

enum class FospStatus { Stationary, NotStationary, Indeterminate };
std::string to_string(FospStatus s);

struct FospResult {
  FospStatus status = FospStatus::Indeterminate;
  double gradient_norm = 0.0;
  MoreauEstimate estimate;

  bool stationary() const { return status == FospStatus::Stationary; }
};

/// Tests ||grad g_{1/(2 L_hat)}(x)|| <= eps. Any configured lambda is ignored.
/// The certified gradient error is added to the norm before comparing.
FospResult is_eps_fosp(const Objective& g, const Vector& x, double eps, double L_hat, MoreauConfig config = {});

}  // namespace smoothmax
