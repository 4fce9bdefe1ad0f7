#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "smoothmax/gradient.hpp"

namespace smoothmax {

using VectorMap = std::function<Vector(const Vector&)>;
using JacobianMap = std::function<Matrix(const Vector&)>;
/// Draws a pair centre from a seed.
using DomainSampler = std::function<Vector(const Seed&)>;

DomainSampler box_sampler(double lo, double hi, int dim);

inline const std::vector<double>& default_pair_scales() {
  static const std::vector<double> s{1e-1, 1e-2, 1e-3};
  return s;
}

/// Spectral norm by power iteration on A^T A.
double operator_norm(const Matrix& A, int iterations = 50, double tol = 1e-10);

/// Pair p at scale d is c_p +- d u_p with c_p from the sampler and u_p a random
/// unit direction, both drawn from counter p of `seed`. Pair p is identical for
/// every n_pairs > p, so the maxima are monotone in n_pairs.
std::pair<Vector, Vector> sample_pair(const DomainSampler& sampler, const Seed& seed, int p, double scale);

/// Max difference quotient per scale.
std::vector<double> lipschitz_by_scale(const VectorMap& map, const DomainSampler& sampler, int n_pairs,
                                       const std::vector<double>& scales, const Seed& seed);
std::vector<double> gradient_lipschitz_by_scale(const JacobianMap& jac, const DomainSampler& sampler, int n_pairs,
                                                const std::vector<double>& scales, const Seed& seed);

double estimate_lipschitz(const VectorMap& map, const DomainSampler& sampler, int n_pairs,
                          const std::vector<double>& scales = default_pair_scales(), const Seed& seed = {});
double estimate_gradient_lipschitz(const JacobianMap& jac, const DomainSampler& sampler, int n_pairs,
                                   const std::vector<double>& scales = default_pair_scales(),
                                   const Seed& seed = {});

/// Central-difference Jacobian (rows = outputs) of a vector map.
Matrix fd_jacobian(const VectorMap& map, const Vector& x, double h = 1e-6);

/// x -> A(x, z) for a fixed seed z.
VectorMap adversary_map(const AlgorithmSpec& spec, const MinimaxOracle& oracle, const Seed& z);
/// x -> DA(x, z); finite differences of the forward map for non-smooth specs.
JacobianMap adversary_jacobian(const AlgorithmSpec& spec, const MinimaxOracle& oracle, const Seed& z);

struct SmoothnessReport {
  double lipschitz_estimate = 0.0;
  double grad_lipschitz_estimate = 0.0;
  std::vector<double> lipschitz_per_scale;
  std::vector<double> grad_lipschitz_per_scale;
  int sample_count = 0;
  std::vector<double> pair_scales;
  SmoothnessCertificate theoretical;
  double slack = 0.01;
  bool lipschitz_violated = false;
  bool grad_lipschitz_violated = false;
  bool violated = false;
};

struct VerifyOptions {
  int n_pairs = 200;
  std::vector<double> scales = default_pair_scales();
  Seed seed{0, 0, 0};
  double slack = 0.01;
  std::optional<Regime> regime;
  bool check_gradient_lipschitz = true;
};

/// Empirical constants of x -> A(x, z) (z fixed per pair) against the certificate.
SmoothnessReport verify_bounds(const AlgorithmSpec& spec, const MinimaxOracle& oracle, const ProblemMetadata& meta,
                               const DomainSampler& sampler, const VerifyOptions& options = {});

struct GradNormProfile {
  std::vector<int> T_values;
  /// norms[i][t]: mean total-gradient norm at x_points[i] for T_values[t].
  std::vector<std::vector<double>> norms;
};

/// ||d/dx f(x, A_T(x, z))|| for each point and T, averaged over the seeds.
GradNormProfile gradient_norm_profile(const MinimaxOracle& oracle, const AlgorithmSpec& spec_template,
                                      const std::vector<Vector>& x_points, const std::vector<int>& T_values,
                                      const std::vector<Seed>& seeds = {Seed{}});

}  // namespace smoothmax
