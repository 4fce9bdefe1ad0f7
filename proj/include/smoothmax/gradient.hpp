#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "smoothmax/adversary.hpp"

namespace smoothmax {

struct TotalGradient {
  double value = 0.0;
  Vector gradient;
  Trajectory trajectory;
};

/// Value and gradient of x -> f(x, A(x, z)), including the algorithm Jacobian term.
TotalGradient total_gradient(const MinimaxOracle& oracle, const AlgorithmSpec& spec, const Vector& x,
                             const Seed& seed);

/// grad_x f(x, A(x, z)) only, without differentiating through the adversary.
TotalGradient partial_gradient(const MinimaxOracle& oracle, const AlgorithmSpec& spec, const Vector& x,
                               const Seed& seed);

/// The adversary's k algorithms. Algorithm i draws its randomness from stream
/// `streams[i]` of the step seed.
struct Toolkit {
  std::vector<AlgorithmSpec> algorithms;
  std::vector<std::uint64_t> streams;

  static Toolkit single(AlgorithmSpec spec);
  /// Streams 0..k-1.
  static Toolkit of(std::vector<AlgorithmSpec> specs);

  int size() const { return static_cast<int>(algorithms.size()); }
  void validate() const;
  bool smooth() const;
  Seed seed_for(int i, const Seed& step_seed) const {
    return step_seed.with_stream(streams[static_cast<std::size_t>(i)]);
  }
};

struct SubgradientSample {
  std::vector<double> values;   // g_{z,i}(x)
  std::vector<int> argmax;      // S(x), ascending
  std::vector<double> weights;  // lambda, supported on S(x)
  Vector subgradient;
  Seed seed;

  double value() const;
};

/// Indices within relative tolerance `tol` of the maximum, ascending.
std::vector<int> argmax_set(const std::vector<double>& values, double tol = 1e-12);

/// Combines per-algorithm (value, gradient) pairs with the lowest-index tie rule.
SubgradientSample combine_pieces(const std::vector<double>& values, const std::vector<Vector>& grads,
                                 const Seed& seed);

SubgradientSample sample_subgradient(const Toolkit& toolkit, const MinimaxOracle& oracle, const Vector& x,
                                     const Seed& seed);

struct WeakConvexityConstants {
  double G_prime = 0.0;
  double L_prime = 0.0;
  double G_hat = 0.0;
  double L_hat_sgd = 0.0;
  double L_hat_prox = 0.0;
  double B = 0.0;
};

WeakConvexityConstants weak_convexity_constants(int k, const ProblemMetadata& meta,
                                                const std::vector<SmoothnessCertificate>& certificates);
WeakConvexityConstants weak_convexity_constants(const Toolkit& toolkit, const ProblemMetadata& meta,
                                                const std::vector<SmoothnessCertificate>& certificates);
/// Certificates from theoretical_smoothness for each algorithm (tightest regime).
WeakConvexityConstants weak_convexity_constants(const Toolkit& toolkit, const ProblemMetadata& meta);

// ---- objectives --------------------------------------------------------------

struct ValueGrad {
  double value = 0.0;
  Vector grad;
};

/// x -> (value, gradient) of one smooth piece.
using SmoothFn = std::function<ValueGrad(const Vector&)>;

/// g(x) = E_z max_i g_{z,i}(x) as seen by solvers and the Moreau meter.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual int dim() const = 0;
  /// True when g is a fixed max of smooth pieces (no fresh randomness per call).
  virtual bool deterministic() const = 0;
  /// All k pieces at x. Only defined for deterministic objectives.
  virtual std::vector<ValueGrad> pieces(const Vector& x) const = 0;
  /// One stochastic subgradient at x for randomness `seed`.
  virtual SubgradientSample sample(const Vector& x, const Seed& seed) const = 0;
  /// Max over pieces; deterministic objectives only.
  double value(const Vector& x) const;
};

/// max_i g_i(x) over explicit smooth functions.
class MaxOfSmooth : public Objective {
 public:
  MaxOfSmooth(int dim, std::vector<SmoothFn> fns);
  int dim() const override { return dim_; }
  bool deterministic() const override { return true; }
  std::vector<ValueGrad> pieces(const Vector& x) const override;
  SubgradientSample sample(const Vector& x, const Seed& seed) const override;
  int size() const { return static_cast<int>(fns_.size()); }

 private:
  int dim_;
  std::vector<SmoothFn> fns_;
};

enum class GradientMode { Total, Partial };

/// Which component an outer evaluation sees. Schedule: the adversary samples
/// components per ascent step and the outer value uses the averaged objective.
/// PerSample: one component is drawn per seed and used throughout.
enum class ComponentMode { Schedule, PerSample };

class ToolkitObjective : public Objective {
 public:
  ToolkitObjective(const MinimaxOracle& oracle, Toolkit toolkit, std::optional<Seed> frozen = std::nullopt,
                   GradientMode gradient = GradientMode::Total,
                   ComponentMode components = ComponentMode::Schedule);

  int dim() const override { return oracle_.d1(); }
  bool deterministic() const override { return frozen_.has_value(); }
  std::vector<ValueGrad> pieces(const Vector& x) const override;
  SubgradientSample sample(const Vector& x, const Seed& seed) const override;

  const Toolkit& toolkit() const { return toolkit_; }
  const MinimaxOracle& oracle() const { return oracle_; }
  /// Component used for a given seed in PerSample mode.
  int component_for(const Seed& seed) const;

 private:
  std::vector<TotalGradient> evaluate_all(const Vector& x, const Seed& seed) const;

  const MinimaxOracle& oracle_;
  Toolkit toolkit_;
  std::optional<Seed> frozen_;
  GradientMode gradient_;
  ComponentMode components_;
};

}  // namespace smoothmax
