#include "smoothmax/smoothlab.hpp"

#include <algorithm>
#include <cmath>

namespace smoothmax {

DomainSampler box_sampler(double lo, double hi, int dim) {
  return [lo, hi, dim](const Seed& s) { return draw_uniform_in_box(s, lo, hi, dim, Role::Lab); };
}

double operator_norm(const Matrix& A, int iterations, double tol) {
  if (A.size() == 0) return 0.0;
  if (A.rows() == 1 || A.cols() == 1) return A.norm();
  const Matrix AtA = A.transpose() * A;
  Vector v = Vector::Ones(A.cols()).normalized();
  double prev = 0.0, est = 0.0;
  for (int k = 0; k < iterations; ++k) {
    Vector w = AtA * v;
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
    est = std::sqrt(n);
    if (std::abs(est - prev) <= tol * std::max(1.0, est)) break;
    prev = est;
  }
  return est;
}

std::pair<Vector, Vector> sample_pair(const DomainSampler& sampler, const Seed& seed, int p, double scale) {
  const Seed s = seed.with_counter(seed.counter + static_cast<std::uint64_t>(p));
  const Vector c = sampler(s);
  Vector u = draw_standard_normal(s, static_cast<int>(c.size()), Role::Lab);
  const double n = u.norm();
  u = n > 0 ? Vector(u / n) : Vector::Unit(c.size(), 0);
  return {c - scale * u, c + scale * u};
}

std::vector<double> lipschitz_by_scale(const VectorMap& map, const DomainSampler& sampler, int n_pairs,
                                       const std::vector<double>& scales, const Seed& seed) {
  if (n_pairs < 1) throw std::invalid_argument("lipschitz estimate needs n_pairs >= 1");
  std::vector<double> out;
  for (double d : scales) {
    double best = 0.0;
    for (int p = 0; p < n_pairs; ++p) {
      const auto [a, b] = sample_pair(sampler, seed, p, d);
      best = std::max(best, (map(a) - map(b)).norm() / (a - b).norm());
    }
    out.push_back(best);
  }
  return out;
}

std::vector<double> gradient_lipschitz_by_scale(const JacobianMap& jac, const DomainSampler& sampler, int n_pairs,
                                                const std::vector<double>& scales, const Seed& seed) {
  if (n_pairs < 1) throw std::invalid_argument("gradient-Lipschitz estimate needs n_pairs >= 1");
  std::vector<double> out;
  for (double d : scales) {
    double best = 0.0;
    for (int p = 0; p < n_pairs; ++p) {
      const auto [a, b] = sample_pair(sampler, seed, p, d);
      best = std::max(best, operator_norm(jac(a) - jac(b)) / (a - b).norm());
    }
    out.push_back(best);
  }
  return out;
}

double estimate_lipschitz(const VectorMap& map, const DomainSampler& sampler, int n_pairs,
                          const std::vector<double>& scales, const Seed& seed) {
  const auto v = lipschitz_by_scale(map, sampler, n_pairs, scales, seed);
  return *std::max_element(v.begin(), v.end());
}

double estimate_gradient_lipschitz(const JacobianMap& jac, const DomainSampler& sampler, int n_pairs,
                                   const std::vector<double>& scales, const Seed& seed) {
  const auto v = gradient_lipschitz_by_scale(jac, sampler, n_pairs, scales, seed);
  return *std::max_element(v.begin(), v.end());
}

Matrix fd_jacobian(const VectorMap& map, const Vector& x, double h) {
  const Vector f0 = map(x);
  Matrix J(f0.size(), x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * (1.0 + std::abs(x[i]));
    probe[i] = x[i] + step;
    const Vector up = map(probe);
    probe[i] = x[i] - step;
    const Vector down = map(probe);
    probe[i] = x[i];
    J.col(i) = (up - down) / (2.0 * step);
  }
  return J;
}

VectorMap adversary_map(const AlgorithmSpec& spec, const MinimaxOracle& oracle, const Seed& z) {
  return [&spec, &oracle, z](const Vector& x) { return run(spec, oracle, x, z).final(); };
}

JacobianMap adversary_jacobian(const AlgorithmSpec& spec, const MinimaxOracle& oracle, const Seed& z) {
  if (spec.smooth())
    return [&spec, &oracle, z](const Vector& x) { return jacobian(spec, oracle, x, z); };
  return [&spec, &oracle, z](const Vector& x) { return fd_jacobian(adversary_map(spec, oracle, z), x); };
}

SmoothnessReport verify_bounds(const AlgorithmSpec& spec, const MinimaxOracle& oracle, const ProblemMetadata& meta,
                               const DomainSampler& sampler, const VerifyOptions& opt) {
  SmoothnessReport rep;
  // Projected ascent has no certificate of its own; it is compared with the
  // unprojected ascent bound it would inherit.
  AlgorithmSpec cert_spec = spec;
  if (spec.kind == AlgorithmKind::ProjectedSGA) cert_spec.kind = AlgorithmKind::SGA;
  rep.theoretical = theoretical_smoothness(cert_spec, meta, opt.regime);
  rep.pair_scales = opt.scales;
  rep.sample_count = opt.n_pairs * static_cast<int>(opt.scales.size());
  rep.slack = opt.slack;

  // The adversary seed z is shared by both points of a pair; one z per pair index.
  std::vector<double> lip(opt.scales.size(), 0.0), glip(opt.scales.size(), 0.0);
  for (std::size_t si = 0; si < opt.scales.size(); ++si) {
    for (int p = 0; p < opt.n_pairs; ++p) {
      const auto [a, b] = sample_pair(sampler, opt.seed, p, opt.scales[si]);
      const Seed z = opt.seed.with_stream(opt.seed.stream + 1).with_counter(static_cast<std::uint64_t>(p));
      const VectorMap A = adversary_map(spec, oracle, z);
      const double dist = (a - b).norm();
      lip[si] = std::max(lip[si], (A(a) - A(b)).norm() / dist);
      if (opt.check_gradient_lipschitz) {
        const JacobianMap J = adversary_jacobian(spec, oracle, z);
        glip[si] = std::max(glip[si], operator_norm(J(a) - J(b)) / dist);
      }
    }
  }
  rep.lipschitz_per_scale = lip;
  rep.grad_lipschitz_per_scale = glip;
  rep.lipschitz_estimate = lip.empty() ? 0.0 : *std::max_element(lip.begin(), lip.end());
  rep.grad_lipschitz_estimate = glip.empty() ? 0.0 : *std::max_element(glip.begin(), glip.end());
  const double s = 1.0 + opt.slack;
  rep.lipschitz_violated = rep.lipschitz_estimate > rep.theoretical.G_prime * s;
  rep.grad_lipschitz_violated =
      opt.check_gradient_lipschitz && rep.grad_lipschitz_estimate > rep.theoretical.L_prime * s;
  rep.violated = rep.lipschitz_violated || rep.grad_lipschitz_violated;
  return rep;
}

GradNormProfile gradient_norm_profile(const MinimaxOracle& oracle, const AlgorithmSpec& spec_template,
                                      const std::vector<Vector>& x_points, const std::vector<int>& T_values,
                                      const std::vector<Seed>& seeds) {
  if (!spec_template.smooth()) throw UnsupportedNonsmooth("gradient_norm_profile: adversary is not smooth");
  if (seeds.empty()) throw std::invalid_argument("gradient_norm_profile: needs at least one seed");
  GradNormProfile prof;
  prof.T_values = T_values;
  for (const Vector& x : x_points) {
    std::vector<double> row;
    for (int T : T_values) {
      AlgorithmSpec spec = spec_template;
      spec.T = T;
      double acc = 0.0;
      for (const Seed& z : seeds) acc += total_gradient(oracle, spec, x, z).gradient.norm();
      row.push_back(acc / static_cast<double>(seeds.size()));
    }
    prof.norms.push_back(std::move(row));
  }
  return prof;
}

}  // namespace smoothmax
