#include "smoothmax/moreau.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "smoothmax/simplex.hpp"

namespace smoothmax {

std::string to_string(MoreauMode m) { return m == MoreauMode::Deterministic ? "deterministic" : "stochastic"; }

std::string to_string(Certification c) {
  switch (c) {
    case Certification::Certified: return "certified";
    case Certification::Probabilistic: return "probabilistic";
    case Certification::NotCertified: return "not_certified";
  }
  return "?";
}

MoreauMode parse_moreau_mode(const std::string& s) {
  if (s == "deterministic") return MoreauMode::Deterministic;
  if (s == "stochastic") return MoreauMode::Stochastic;
  throw std::invalid_argument("unknown moreau mode '" + s + "'");
}

std::string to_string(FospStatus s) {
  switch (s) {
    case FospStatus::Stationary: return "stationary";
    case FospStatus::NotStationary: return "not_stationary";
    case FospStatus::Indeterminate: return "indeterminate";
  }
  return "?";
}

namespace {

Matrix stack_grads(const std::vector<ValueGrad>& pieces) {
  Matrix G(pieces.front().grad.size(), static_cast<Eigen::Index>(pieces.size()));
  for (std::size_t i = 0; i < pieces.size(); ++i) G.col(static_cast<Eigen::Index>(i)) = pieces[i].grad;
  return G;
}

Vector stack_values(const std::vector<ValueGrad>& pieces) {
  Vector a(static_cast<Eigen::Index>(pieces.size()));
  for (std::size_t i = 0; i < pieces.size(); ++i) a[static_cast<Eigen::Index>(i)] = pieces[i].value;
  return a;
}

double max_value(const std::vector<ValueGrad>& pieces) {
  double m = pieces.front().value;
  for (const auto& p : pieces) m = std::max(m, p.value);
  return m;
}

double phi(const std::vector<ValueGrad>& pieces, const Vector& x, const Vector& center, double lambda) {
  return max_value(pieces) + (x - center).squaredNorm() / (2.0 * lambda);
}

constexpr int kQpIterations = 2000;

}  // namespace

double prox_lower_bound(const std::vector<ValueGrad>& pieces, const Vector& z, const Vector& center,
                        double lambda, double L_w, Vector* weights) {
  const double mu = 1.0 / lambda - L_w;
  if (!(mu > 0)) throw std::invalid_argument("prox_lower_bound: lambda must be below 1/L_w");
  const Matrix G = stack_grads(pieces);
  const Vector a = stack_values(pieces);
  const Vector r = (z - center) / lambda;
  const Matrix K = G.transpose() * G;
  const Vector b = G.transpose() * r;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const Vector w0 = weights && weights->size() == a.size() ? *weights : Vector();
  const SimplexQpResult qp = solve_simplex_qp(a, K, b, mu, 1e-15 * scale, kQpIterations, w0);
  if (weights) *weights = qp.w;
  const Vector s = G * qp.w + r;
  return a.dot(qp.w) + (z - center).squaredNorm() / (2.0 * lambda) - s.squaredNorm() / (2.0 * mu);
}

ProxSolve prox_minimize(const Objective& g, const Vector& center, double lambda, double L_w, double gap_target,
                        int budget, std::optional<double> curvature_guess, int polish) {
  if (!g.deterministic()) throw std::invalid_argument("prox_minimize: objective must be deterministic");
  if (!(lambda > 0) || !(1.0 / lambda > L_w)) throw std::invalid_argument("prox_minimize: need 0 < lambda < 1/L_w");
  if (!(gap_target > 0)) throw std::invalid_argument("prox_minimize: gap target must be positive");

  Vector z = center;
  std::vector<ValueGrad> P = g.pieces(z);
  double fz = phi(P, z, center, lambda);
  ProxSolve out;
  out.x = z;
  out.value = fz;
  Vector w_cert;
  out.lower_bound = prox_lower_bound(P, z, center, lambda, L_w, &w_cert);
  const double target = std::max(gap_target, 1e-13 * (1.0 + std::abs(fz)));

  const double inv_lambda = 1.0 / lambda;
  const double m_floor = 1e-10 * inv_lambda;
  double M = std::max(curvature_guess.value_or(L_w), m_floor);
  Vector w_sub;
  int idle = 0;
  int it = 0;
  bool polishing = false;
  for (; it < budget; ++it) {
    if (out.value - out.lower_bound <= target) {
      if (polish-- <= 0) break;
      polishing = true;
    }
    // Prox-linear step: minimise the linearised max plus (M/2)||x - z||^2 + prox term.
    const Matrix G = stack_grads(P);
    const double ctot = M + inv_lambda;
    const Vector p = (M * z + inv_lambda * center) / ctot;
    const Vector a = stack_values(P) + G.transpose() * (p - z);
    const Matrix K = G.transpose() * G;
    const SimplexQpResult qp =
        solve_simplex_qp(a, K, Vector::Zero(a.size()), ctot, 1e-15 * std::max(1.0, a.cwiseAbs().maxCoeff()),
                         kQpIterations, w_sub);
    w_sub = qp.w;
    const Vector xn = p - G * qp.w / ctot;
    const Vector lin = stack_values(P) + G.transpose() * (xn - z);
    const double model = lin.maxCoeff() + 0.5 * M * (xn - z).squaredNorm() +
                         (xn - center).squaredNorm() / (2.0 * lambda);

    std::vector<ValueGrad> Pn = g.pieces(xn);
    const double fn = phi(Pn, xn, center, lambda);
    out.lower_bound = std::max(out.lower_bound, prox_lower_bound(Pn, xn, center, lambda, L_w, &w_cert));
    // Values are flat near the minimiser, so polishing follows the iterate
    // rather than the (roundoff-limited) best value.
    if (fn < out.value || (polishing && fn <= out.value + 1e-14 * (1.0 + std::abs(out.value)))) {
      out.value = fn;
      out.x = xn;
    }
    // Majorant check on values, plus a secant curvature check per piece that
    // stays meaningful once value differences hit roundoff.
    const double moved = (xn - z).norm();
    double secant = 0.0;
    if (moved > 0)
      for (std::size_t i = 0; i < P.size(); ++i)
        secant = std::max(secant, (Pn[i].grad - P[i].grad).dot(xn - z) / (moved * moved));
    if (fn > model + 1e-15 * (1.0 + std::abs(model)) || secant > M * (1.0 + 1e-9)) {
      M *= 2.0;
      continue;
    }
    z = xn;
    P = std::move(Pn);
    fz = fn;
    M = std::max(0.5 * M, m_floor);
    idle = moved <= 1e-15 * (1.0 + z.norm()) ? idle + 1 : 0;
    if (idle >= 3) break;
  }
  out.iterations = it;
  out.certified = out.value - out.lower_bound <= target;
  return out;
}

namespace {

MoreauEstimate deterministic_estimate(const Objective& g, const Vector& x, const MoreauConfig& cfg, double L_hat,
                                      double lambda, double target) {
  const double mu = 1.0 / lambda - L_hat;
  int budget = cfg.inner_budget;
  if (budget <= 0) {
    const double cond = (1.0 / lambda + L_hat) / mu;
    budget = static_cast<int>(std::ceil(10.0 * cond * std::log(std::max(10.0, 1.0 / target))));
    budget = std::clamp(budget, 100, 5000);
  }
  const ProxSolve ps = prox_minimize(g, x, lambda, L_hat, target, budget, cfg.curvature_guess, cfg.polish);
  MoreauEstimate e;
  e.x = x;
  e.x_hat = ps.x;
  e.lambda = lambda;
  e.envelope_value = ps.value;
  e.gradient = (x - ps.x) / lambda;
  e.inner_residual = std::max(0.0, ps.value - ps.lower_bound);
  e.gradient_error = std::sqrt(2.0 * e.inner_residual / mu) / lambda;
  e.certification = ps.certified ? Certification::Certified : Certification::NotCertified;
  e.iterations = ps.iterations;
  return e;
}

// Projected SGD on the mu-strongly convex prox objective, step 1/(mu (t+1)),
// averaging the second half of the iterates.
MoreauEstimate stochastic_estimate(const Objective& g, const Vector& x, const MoreauConfig& cfg, double L_hat,
                                   double lambda, double target) {
  const double mu = 1.0 / lambda - L_hat;
  const double radius = cfg.subgradient_bound ? lambda * *cfg.subgradient_bound
                                              : std::numeric_limits<double>::infinity();
  int budget = cfg.inner_budget;
  const double Gphi = cfg.subgradient_bound ? 2.0 * *cfg.subgradient_bound : 1.0;
  if (budget <= 0) {
    const double want = Gphi * Gphi * 32.0 / (mu * target);
    budget = static_cast<int>(std::min<double>(cfg.stochastic_cap, std::max(200.0, std::ceil(want))));
  }
  Vector xp = x;
  Vector avg = Vector::Zero(x.size());
  int averaged = 0;
  const int half = budget / 2;
  for (int t = 0; t < budget; ++t) {
    const Seed s = cfg.seed.with_counter(cfg.seed.counter + static_cast<std::uint64_t>(t));
    const SubgradientSample smp = g.sample(xp, s);
    const Vector step = smp.subgradient + (xp - x) / lambda;
    xp -= step / (mu * (t + 1.0));
    const double dist = (xp - x).norm();
    if (dist > radius) xp = x + (xp - x) * (radius / dist);
    if (t >= half) {
      avg += xp;
      ++averaged;
    }
  }
  avg /= static_cast<double>(std::max(1, averaged));
  double gsum = 0.0;
  const int m = std::max(1, cfg.value_samples);
  for (int i = 0; i < m; ++i) {
    const Seed s = cfg.seed.with_counter(cfg.seed.counter + static_cast<std::uint64_t>(budget + i));
    gsum += g.sample(avg, s).value();
  }
  MoreauEstimate e;
  e.x = x;
  e.x_hat = avg;
  e.lambda = lambda;
  e.envelope_value = gsum / m + (avg - x).squaredNorm() / (2.0 * lambda);
  e.gradient = (x - avg) / lambda;
  // Expected-suboptimality rate of suffix-averaged SGD; a guide, not a certificate.
  const double G2 = std::pow(Gphi + (std::isfinite(radius) ? radius / lambda : 0.0), 2);
  e.inner_residual = 4.0 * G2 / (mu * budget);
  e.gradient_error = std::sqrt(2.0 * e.inner_residual / mu) / lambda;
  e.certification = Certification::Probabilistic;
  e.iterations = budget;
  return e;
}

}  // namespace

MoreauEstimate moreau_estimate(const Objective& g, const Vector& x, const MoreauConfig& config, double L_hat) {
  if (!(L_hat >= 0)) throw std::invalid_argument("moreau_estimate: L_hat must be nonnegative");
  if (x.size() != g.dim()) throw std::invalid_argument("moreau_estimate: x has wrong length");
  if (!config.lambda && !(L_hat > 0))
    throw std::invalid_argument("moreau_estimate: default lambda needs L_hat > 0");
  const double lambda = config.lambda.value_or(1.0 / (2.0 * L_hat));
  if (!(lambda > 0) || !(lambda * L_hat < 1.0))
    throw std::invalid_argument("moreau_estimate: need 0 < lambda < 1/L_hat");
  if (!(config.eps > 0)) throw std::invalid_argument("moreau_estimate: eps must be positive");
  const double target =
      config.gap_target.value_or(L_hat > 0 ? config.eps * config.eps / (4.0 * L_hat)
                                           : config.eps * config.eps * lambda / 2.0);
  if (config.mode == MoreauMode::Stochastic || !g.deterministic())
    return stochastic_estimate(g, x, config, L_hat, lambda, target);
  return deterministic_estimate(g, x, config, L_hat, lambda, target);
}

FospResult is_eps_fosp(const Objective& g, const Vector& x, double eps, double L_hat, MoreauConfig config) {
  if (!(eps > 0)) throw std::invalid_argument("is_eps_fosp: eps must be positive");
  if (!(L_hat > 0)) throw std::invalid_argument("is_eps_fosp: L_hat must be positive");
  const double lambda = 1.0 / (2.0 * L_hat);
  const double mu = 1.0 / lambda - L_hat;
  config.lambda = lambda;
  config.eps = eps;
  // Solve tightly enough that the certified gradient error is at most eps / 10.
  const double tight = std::pow(0.1 * eps * lambda, 2) * mu / 2.0;
  config.gap_target = std::min(config.gap_target.value_or(tight), tight);
  FospResult r;
  r.estimate = moreau_estimate(g, x, config, L_hat);
  r.gradient_norm = r.estimate.gradient_norm();
  if (r.estimate.certification == Certification::Probabilistic) {
    r.status = r.gradient_norm <= eps ? FospStatus::Stationary : FospStatus::NotStationary;
    return r;
  }
  const double err = r.estimate.gradient_error;
  if (r.gradient_norm + err <= eps)
    r.status = FospStatus::Stationary;
  else if (r.gradient_norm - err > eps)
    r.status = FospStatus::NotStationary;
  else
    r.status = FospStatus::Indeterminate;
  return r;
}

}  // namespace smoothmax
