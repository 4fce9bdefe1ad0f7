#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "smoothmax/random.hpp"

namespace smoothmax {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---- errors -----------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value produced somewhere in an evaluation chain.
class NumericFailure : public Error {
 public:
  NumericFailure(const std::string& what, Vector point, std::optional<long> step = std::nullopt)
      : Error(what), point_(std::move(point)), step_(step) {}
  const Vector& point() const { return point_; }
  std::optional<long> step() const { return step_; }

 private:
  Vector point_;
  std::optional<long> step_;
};

class UnsupportedNonsmooth : public Error {
 public:
  using Error::Error;
};

class UnsupportedRegime : public Error {
 public:
  using Error::Error;
};

class SizeLimitExceeded : public Error {
 public:
  using Error::Error;
};

class ToleranceFailure : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

bool all_finite(const Vector& v);

// ---- metadata ---------------------------------------------------------------

enum class ConstantsSource { Declared, Estimated, Unknown };

struct ProblemMetadata {
  int d1 = 1;
  int d2 = 1;
  double B = 0.0;
  double G = 0.0;
  double L = 0.0;
  double rho = 0.0;
  std::optional<double> alpha;
  bool concave_in_y = false;
  int n_components = 1;
  ConstantsSource source = ConstantsSource::Declared;

  /// Throws std::invalid_argument on a broken invariant.
  void validate() const;
  /// L / alpha; requires alpha.
  double kappa() const;
};

// ---- oracle -----------------------------------------------------------------

/// Component selector. nullopt means the uniform average over all components.
using Component = std::optional<int>;

struct FullEval {
  double value = 0.0;
  Vector gx;
  Vector gy;
};

/// Two-player objective f(x, y) = (1/n) sum_j f_j(x, y). Implementations must be
/// pure: identical arguments give bit-identical results.
class MinimaxOracle {
 public:
  virtual ~MinimaxOracle() = default;

  virtual const ProblemMetadata& metadata() const = 0;
  virtual double value(const Vector& x, const Vector& y, Component j = std::nullopt) const = 0;
  virtual Vector grad_x(const Vector& x, const Vector& y, Component j = std::nullopt) const = 0;
  virtual Vector grad_y(const Vector& x, const Vector& y, Component j = std::nullopt) const = 0;

  /// Value and both gradients at once; override when they share work (backprop).
  virtual FullEval evaluate(const Vector& x, const Vector& y, Component j = std::nullopt) const;

  virtual bool has_analytic_hvp() const { return false; }
  /// (d^2 f / dy^2) v. Default: central differences on a normalised direction.
  virtual Vector hvp_yy(const Vector& x, const Vector& y, const Vector& v,
                        Component j = std::nullopt) const;
  /// d/dx <grad_y f(x, y), v>, a d1-vector.
  virtual Vector hvp_xy(const Vector& x, const Vector& y, const Vector& v,
                        Component j = std::nullopt) const;
  /// Both products; the finite-difference default shares the two evaluations.
  virtual std::pair<Vector, Vector> hvp_pair(const Vector& x, const Vector& y, const Vector& v,
                                             Component j = std::nullopt) const;

  /// Problem-specific default starting point for the max player.
  virtual Vector default_y0(const Seed& seed) const;

  int d1() const { return metadata().d1; }
  int d2() const { return metadata().d2; }

 protected:
  void check_dims(const Vector& x, const Vector& y) const;
};

/// Oracle assembled from callables; used for small closed-form test objectives.
class CallbackOracle : public MinimaxOracle {
 public:
  using ValueFn = std::function<double(const Vector&, const Vector&)>;
  using GradFn = std::function<Vector(const Vector&, const Vector&)>;
  using HvpFn = std::function<Vector(const Vector&, const Vector&, const Vector&)>;

  CallbackOracle(ProblemMetadata meta, ValueFn value, GradFn gx, GradFn gy, HvpFn hyy = {},
                 HvpFn hxy = {});

  const ProblemMetadata& metadata() const override { return meta_; }
  double value(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  Vector grad_x(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  Vector grad_y(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  bool has_analytic_hvp() const override { return static_cast<bool>(hyy_) && static_cast<bool>(hxy_); }
  Vector hvp_yy(const Vector& x, const Vector& y, const Vector& v,
                Component j = std::nullopt) const override;
  Vector hvp_xy(const Vector& x, const Vector& y, const Vector& v,
                Component j = std::nullopt) const override;
  std::pair<Vector, Vector> hvp_pair(const Vector& x, const Vector& y, const Vector& v,
                                     Component j = std::nullopt) const override;

 private:
  ProblemMetadata meta_;
  ValueFn value_;
  GradFn gx_, gy_;
  HvpFn hyy_, hxy_;
};

/// Single-component view f_j of a finite-sum oracle. Calls with j = nullopt
/// are routed to component j of the parent.
class ComponentOracle : public MinimaxOracle {
 public:
  ComponentOracle(const MinimaxOracle& parent, int j);

  const ProblemMetadata& metadata() const override { return meta_; }
  double value(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  Vector grad_x(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  Vector grad_y(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  FullEval evaluate(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  bool has_analytic_hvp() const override { return parent_.has_analytic_hvp(); }
  Vector hvp_yy(const Vector& x, const Vector& y, const Vector& v,
                Component j = std::nullopt) const override;
  Vector hvp_xy(const Vector& x, const Vector& y, const Vector& v,
                Component j = std::nullopt) const override;
  std::pair<Vector, Vector> hvp_pair(const Vector& x, const Vector& y, const Vector& v,
                                     Component j = std::nullopt) const override;
  Vector default_y0(const Seed& seed) const override { return parent_.default_y0(seed); }

 private:
  Component pick(Component j) const {
    if (j && *j != 0) throw std::invalid_argument("ComponentOracle: only component 0 exists");
    return Component(j_);
  }
  const MinimaxOracle& parent_;
  int j_;
  ProblemMetadata meta_;
};

// ---- finite differences -----------------------------------------------------

/// Default central-difference step for a direction v.
double default_fd_step(const Vector& v);

/// (grad_y(x, y + h v) - grad_y(x, y - h v)) / (2h). Always finite-difference,
/// even when the oracle has analytic products.
Vector fd_hvp_yy(const MinimaxOracle& oracle, const Vector& x, const Vector& y, const Vector& v,
                 Component j = std::nullopt, std::optional<double> h = std::nullopt);
/// (grad_x(x, y + h v) - grad_x(x, y - h v)) / (2h).
Vector fd_hvp_xy(const MinimaxOracle& oracle, const Vector& x, const Vector& y, const Vector& v,
                 Component j = std::nullopt, std::optional<double> h = std::nullopt);

/// Scalar map with gradient; the gradient pointer may be null.
using ScalarMap = std::function<double(const Vector&, Vector*)>;

/// Relative discrepancy between the map's gradient and coordinate-wise central
/// differences, normalised by max(1, ||central difference||).
double gradient_check(const ScalarMap& map, const Vector& x, double h = 1e-5);

/// Central-difference gradient of a scalar map.
Vector central_difference(const ScalarMap& map, const Vector& x, double h);

/// Empirical constants from samples of (x, y) drawn by the sampler. The result
/// carries ConstantsSource::Estimated and is never substituted for declared
/// constants by the library itself.
struct EstimateOptions {
  int n_points = 64;
  int power_iterations = 30;
  double pair_distance = 1e-3;
};
using PointSampler = std::function<std::pair<Vector, Vector>(const Seed&)>;
ProblemMetadata estimate_metadata(const MinimaxOracle& oracle, const PointSampler& sampler,
                                  const Seed& seed, const EstimateOptions& opts = {});

}  // namespace smoothmax
