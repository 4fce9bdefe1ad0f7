#include "smoothmax/solvers.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace smoothmax {

std::string to_string(ReturnRule r) {
  switch (r) {
    case ReturnRule::Uniform: return "uniform";
    case ReturnRule::Last: return "last";
    case ReturnRule::Postprocess: return "postprocess";
  }
  return "?";
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Budget: return "budget";
    case Termination::FospCertified: return "fosp_certified";
    case Termination::Stall: return "stall";
    case Termination::NumericFailure: return "numeric_failure";
    case Termination::ToleranceFailure: return "tolerance_failure";
  }
  return "?";
}

ReturnRule parse_return_rule(const std::string& s) {
  if (s == "uniform") return ReturnRule::Uniform;
  if (s == "last") return ReturnRule::Last;
  if (s == "postprocess") return ReturnRule::Postprocess;
  throw std::invalid_argument("unknown return rule '" + s + "'");
}

std::string to_string(InnerMethod m) { return m == InnerMethod::ProxLinear ? "prox_linear" : "extragradient"; }

InnerMethod parse_inner_method(const std::string& s) {
  if (s == "prox_linear") return InnerMethod::ProxLinear;
  if (s == "extragradient") return InnerMethod::Extragradient;
  throw std::invalid_argument("unknown inner method '" + s + "'");
}

std::string to_string(GdaMode m) {
  switch (m) {
    case GdaMode::Simultaneous: return "simultaneous";
    case GdaMode::Alternating: return "alternating";
    case GdaMode::PartialGradient: return "partial_gradient";
  }
  return "?";
}

GdaMode parse_gda_mode(const std::string& s) {
  if (s == "simultaneous") return GdaMode::Simultaneous;
  if (s == "alternating") return GdaMode::Alternating;
  if (s == "partial_gradient") return GdaMode::PartialGradient;
  throw std::invalid_argument("unknown baseline mode '" + s + "'");
}

const Vector* SolverReport::iterate_at(long step) const {
  for (const auto& [s, x] : iterates)
    if (s == step) return &x;
  return nullptr;
}

double auto_step_size(double B, double L_hat, double G_hat, long n_steps) {
  if (!(B > 0) || !(L_hat > 0) || !(G_hat > 0) || n_steps < 1)
    throw std::invalid_argument("auto_step_size: needs B, L_hat, G_hat > 0 and at least one step");
  return std::sqrt(2.0 * B / (L_hat * G_hat * G_hat * static_cast<double>(n_steps)));
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

MoreauConfig meter_config(const MoreauConfig& base, const Objective& g, long step) {
  MoreauConfig c = base;
  if (!g.deterministic()) c.mode = MoreauMode::Stochastic;
  c.seed = Seed{base.seed.base, base.seed.stream, base.seed.counter + (static_cast<std::uint64_t>(step) << 24)};
  return c;
}

}  // namespace

SolverReport sgd_solve(const Objective& g, const Vector& x0, const SolverConfig& config,
                       const WeakConvexityConstants& constants) {
  if (config.S < 0) throw std::invalid_argument("sgd_solve: S must be >= 0");
  if (!(config.eps > 0)) throw std::invalid_argument("sgd_solve: eps must be positive");
  if (x0.size() != g.dim()) throw std::invalid_argument("sgd_solve: x0 has wrong length");
  const long n_steps = config.S + 1;
  const double L_hat = constants.L_hat_sgd;

  SolverReport rep;
  rep.rule = config.return_rule;
  rep.eta = config.eta ? *config.eta : auto_step_size(constants.B, L_hat, constants.G_hat, n_steps);
  if (!(rep.eta > 0)) throw std::invalid_argument("sgd_solve: eta must be positive");
  const bool metering = config.record_moreau_every > 0 || config.return_rule == ReturnRule::Postprocess;
  if (metering && !(L_hat > 0)) throw std::invalid_argument("sgd_solve: Moreau metering needs L_hat > 0");

  // Output indices are fixed before the run so they do not depend on its outcome.
  CounterRng pick(config.seed, Role::SolverSampling);
  std::set<long> wanted;
  long uniform_pick = 0;
  if (config.return_rule == ReturnRule::Uniform) {
    uniform_pick = static_cast<long>(pick.below(static_cast<std::uint64_t>(n_steps)));
    wanted.insert(uniform_pick);
  } else if (config.return_rule == ReturnRule::Postprocess) {
    const long m = std::min<long>(32, n_steps);
    for (long i = 0; i < m; ++i) wanted.insert(static_cast<long>(pick.below(static_cast<std::uint64_t>(n_steps))));
  }

  const long keep = std::max<long>(1, config.keep_every);
  Vector x = x0;
  Vector last_x = x0;
  double prev = std::numeric_limits<double>::quiet_NaN();
  long unchanged = 0;
  long executed = 0;
  for (long s = 0; s <= config.S; ++s) {
    const auto t0 = Clock::now();
    const Seed step_seed = config.seed.with_counter(config.seed.counter + static_cast<std::uint64_t>(s));
    StepRecord rec;
    rec.step = s;
    SubgradientSample smp;
    try {
      smp = g.sample(x, step_seed);
    } catch (const NumericFailure& e) {
      rep.termination = Termination::NumericFailure;
      rep.message = e.what();
      break;
    }
    rec.g_sample = smp.value();
    rec.subgrad_norm = smp.subgradient.norm();
    bool certified_here = false;
    if (config.record_moreau_every > 0 && s % config.record_moreau_every == 0) {
      const MoreauConfig mc = meter_config(config.moreau, g, s);
      if (config.stop_on_fosp) {
        const FospResult fr = is_eps_fosp(g, x, config.eps, L_hat, mc);
        rec.moreau_grad_norm = fr.gradient_norm;
        certified_here = fr.stationary();
      } else {
        rec.moreau_grad_norm = moreau_estimate(g, x, mc, L_hat).gradient_norm();
      }
    }
    rec.wall_ms = ms_since(t0);
    if (s % keep == 0 || wanted.count(s) || s == config.S) rep.iterates.emplace_back(s, x);
    rep.records.push_back(rec);
    last_x = x;
    executed = s + 1;
    if (config.on_step) config.on_step(rec, x);

    if (certified_here) {
      rep.termination = Termination::FospCertified;
      rep.x_bar = x;
      rep.x_bar_step = s;
      break;
    }
    if (config.stall_window > 0) {
      const double tol = config.stall_tol * std::max(1.0, std::abs(rec.g_sample));
      unchanged = std::abs(rec.g_sample - prev) <= tol ? unchanged + 1 : 0;
      prev = rec.g_sample;
      if (unchanged >= config.stall_window) {
        rep.termination = Termination::Stall;
        break;
      }
    }
    x -= rep.eta * smp.subgradient;
    if (!all_finite(x)) {
      rep.termination = Termination::NumericFailure;
      std::ostringstream os;
      os << "iterate became non-finite after step " << s;
      rep.message = os.str();
      break;
    }
  }

  if (rep.termination == Termination::FospCertified) return rep;
  if (executed == 0) {
    rep.x_bar = x0;
    rep.x_bar_step = 0;
    if (rep.iterates.empty()) rep.iterates.emplace_back(0, x0);
    return rep;
  }
  const long last = executed - 1;
  auto ensure_kept = [&](long s) -> const Vector& {
    if (const Vector* v = rep.iterate_at(s)) return *v;
    throw std::logic_error("sgd_solve: requested iterate was not stored");
  };
  switch (config.return_rule) {
    case ReturnRule::Last:
      rep.x_bar_step = last;
      if (!rep.iterate_at(last)) rep.iterates.emplace_back(last, last_x);
      rep.x_bar = ensure_kept(last);
      break;
    case ReturnRule::Uniform: {
      long s = uniform_pick;
      if (s > last) {
        // Early stop: redraw among the steps that ran, keeping whatever was stored.
        std::vector<long> have;
        for (const auto& it : rep.iterates) have.push_back(it.first);
        s = have[static_cast<std::size_t>(pick.below(have.size()))];
      }
      rep.x_bar_step = s;
      rep.x_bar = ensure_kept(s);
      break;
    }
    case ReturnRule::Postprocess: {
      double best = std::numeric_limits<double>::infinity();
      for (long s : wanted) {
        const Vector* v = rep.iterate_at(s);
        if (!v) continue;
        MoreauEstimate est = moreau_estimate(g, *v, meter_config(config.moreau, g, s), L_hat);
        if (est.gradient_norm() < best) {
          best = est.gradient_norm();
          rep.x_bar = *v;
          rep.x_bar_step = s;
          rep.final_moreau = std::move(est);
        }
      }
      if (!rep.final_moreau) {
        rep.x_bar_step = rep.iterates.back().first;
        rep.x_bar = rep.iterates.back().second;
      }
      break;
    }
  }
  if (metering && !rep.final_moreau)
    rep.final_moreau = moreau_estimate(g, rep.x_bar, meter_config(config.moreau, g, rep.x_bar_step), L_hat);
  return rep;
}

// ---- proximal ------------------------------------------------------------------------

namespace {

InnerResult extragradient_solve(const Objective& g, const Vector& xs, double L_hat, double tol, int budget) {
  const double lambda = 1.0 / (2.0 * L_hat);
  const int k = static_cast<int>(g.pieces(xs).size());
  Vector x = xs;
  Vector w = Vector::Constant(k, 1.0 / k);
  Vector xsum = Vector::Zero(xs.size());
  long nsum = 0;
  double gamma = 1.0 / (4.0 * L_hat);

  auto field = [&](const Vector& xp, const Vector& wp, Vector& fx, Vector& fw) {
    const auto P = g.pieces(xp);
    fx = 2.0 * L_hat * (xp - xs);
    fw.resize(k);
    for (int i = 0; i < k; ++i) {
      fx += wp[i] * P[static_cast<std::size_t>(i)].grad;
      fw[i] = P[static_cast<std::size_t>(i)].value;
    }
  };
  auto phi_at = [&](const Vector& xp, std::vector<ValueGrad>& P) {
    P = g.pieces(xp);
    double m = P.front().value;
    for (const auto& p : P) m = std::max(m, p.value);
    return m + L_hat * (xp - xs).squaredNorm();
  };

  InnerResult best;
  best.x = xs;
  std::vector<ValueGrad> P;
  best.value = phi_at(xs, P);
  double lower = prox_lower_bound(P, xs, xs, lambda, L_hat);
  const double floor = 1e-13 * (1.0 + std::abs(best.value));
  int it = 0;
  for (; it < budget; ++it) {
    Vector fx, fw, hx, hw;
    field(x, w, fx, fw);
    Vector xh, wh;
    for (;;) {
      xh = x - gamma * fx;
      wh = simplex_project(w + gamma * fw);
      field(xh, wh, hx, hw);
      const double lhs = gamma * std::sqrt((hx - fx).squaredNorm() + (hw - fw).squaredNorm());
      const double rhs = 0.9 * std::sqrt((xh - x).squaredNorm() + (wh - w).squaredNorm());
      if (lhs <= rhs || gamma < 1e-14) break;
      gamma *= 0.5;
    }
    x -= gamma * hx;
    w = simplex_project(w + gamma * hw);
    xsum += xh;
    ++nsum;
    if (it % 10 == 9 || it + 1 == budget) {
      const Vector xbar = xsum / static_cast<double>(nsum);
      for (const Vector* cand : std::array<const Vector*, 2>{&xbar, &x}) {
        const double v = phi_at(*cand, P);
        lower = std::max(lower, prox_lower_bound(P, *cand, xs, lambda, L_hat));
        if (v < best.value) {
          best.value = v;
          best.x = *cand;
        }
      }
      if (best.value - lower <= std::max(tol, floor)) break;
    }
  }
  best.gap = std::max(0.0, best.value - lower);
  best.iterations = it;
  return best;
}

}  // namespace

InnerResult inner_prox_solve(const Objective& g, const Vector& x_s, double L_hat, double tol, InnerMethod method,
                             int budget) {
  if (!(tol > 0)) throw std::invalid_argument("inner_prox_solve: tol must be positive");
  if (!(L_hat > 0)) throw std::invalid_argument("inner_prox_solve: L_hat must be positive");
  if (!g.deterministic()) throw std::invalid_argument("inner_prox_solve: objective must be deterministic");
  InnerResult r;
  if (method == InnerMethod::Extragradient) {
    r = extragradient_solve(g, x_s, L_hat, tol, budget > 0 ? budget : 200000);
  } else {
    const double lambda = 1.0 / (2.0 * L_hat);
    const ProxSolve ps = prox_minimize(g, x_s, lambda, L_hat, tol, budget > 0 ? budget : 5000);
    r.x = ps.x;
    r.value = ps.value;
    r.gap = std::max(0.0, ps.value - ps.lower_bound);
    r.iterations = ps.iterations;
  }
  const double floor = 1e-13 * (1.0 + std::abs(r.value));
  if (r.gap > std::max(tol, floor)) {
    std::ostringstream os;
    os << "inner_prox_solve: certified gap " << r.gap << " exceeds tolerance " << tol << " after " << r.iterations
       << " iterations";
    throw ToleranceFailure(os.str());
  }
  return r;
}

ProximalReport proximal_solve(const Objective& g, const Vector& x0, double eps,
                              const WeakConvexityConstants& constants, const ProximalConfig& config) {
  if (!(eps > 0)) throw std::invalid_argument("proximal_solve: eps must be positive");
  if (!g.deterministic()) throw std::invalid_argument("proximal_solve: objective must be deterministic");
  const double L = constants.L_hat_prox;
  if (!(L > 0)) throw std::invalid_argument("proximal_solve: L_hat_prox must be positive");
  ProximalReport rep;
  rep.rule = ReturnRule::Last;
  rep.eps_hat = eps * eps / (64.0 * L);
  rep.outer_bound = static_cast<long>(std::ceil(200.0 * L * constants.B / (eps * eps)));
  const long max_outer = config.max_outer.value_or(std::max<long>(rep.outer_bound, 1));

  Vector x = x0;
  double gx = g.value(x);
  rep.max_values.push_back(gx);
  rep.iterates.emplace_back(0, x);
  rep.termination = Termination::Budget;
  for (long s = 0;; ++s) {
    if (s >= max_outer) break;
    const auto t0 = Clock::now();
    InnerResult inner;
    try {
      inner = inner_prox_solve(g, x, L, rep.eps_hat / 4.0, config.method, config.inner_budget);
    } catch (const ToleranceFailure& e) {
      rep.termination = Termination::ToleranceFailure;
      rep.message = e.what();
      break;
    } catch (const NumericFailure& e) {
      rep.termination = Termination::NumericFailure;
      rep.message = e.what();
      break;
    }
    StepRecord rec;
    rec.step = s;
    rec.g_sample = gx;
    rec.moreau_grad_norm = 2.0 * L * (x - inner.x).norm();
    rec.subgrad_norm = g.sample(x, Seed{}).subgradient.norm();
    rec.wall_ms = ms_since(t0);
    rep.records.push_back(rec);
    rep.outer_iterations = s + 1;
    if (config.on_step) config.on_step(rec, x);
    if (inner.value >= gx - 0.75 * rep.eps_hat) {
      rep.termination = Termination::FospCertified;
      break;
    }
    x = inner.x;
    gx = g.value(x);
    rep.max_values.push_back(gx);
    rep.iterates.emplace_back(s + 1, x);
  }
  rep.x_bar = x;
  rep.x_bar_step = rep.iterates.back().first;
  return rep;
}

// ---- GDA ------------------------------------------------------------------------------

GdaReport gda_baseline(const MinimaxOracle& oracle, const Vector& x0, const Vector& y0, const GdaConfig& config) {
  if (x0.size() != oracle.d1() || y0.size() != oracle.d2())
    throw std::invalid_argument("gda_baseline: starting point has wrong dimensions");
  if (!(config.eta_x > 0) || !(config.eta_y > 0)) throw std::invalid_argument("gda_baseline: step sizes must be positive");
  GdaReport rep;
  Vector x = x0, y = y0;
  rep.xs.reserve(static_cast<std::size_t>(config.steps) + 1);
  rep.ys.reserve(static_cast<std::size_t>(config.steps) + 1);
  rep.xs.push_back(x);
  rep.ys.push_back(y);
  AlgorithmSpec adv = config.adversary;
  adv.eta = config.eta_y;
  for (long s = 0; s < config.steps; ++s) {
    const auto t0 = Clock::now();
    StepRecord rec;
    rec.step = s;
    Vector xe, ye;
    try {
      switch (config.mode) {
        case GdaMode::Simultaneous: {
          const FullEval e = oracle.evaluate(x, y);
          rec.g_sample = e.value;
          rec.subgrad_norm = e.gx.norm();
          xe = x;
          ye = y;
          x -= config.eta_x * e.gx;
          y += config.eta_y * e.gy;
          break;
        }
        case GdaMode::Alternating: {
          y += config.eta_y * oracle.grad_y(x, y);
          const FullEval e = oracle.evaluate(x, y);
          rec.g_sample = e.value;
          rec.subgrad_norm = e.gx.norm();
          xe = x;
          ye = y;
          x -= config.eta_x * e.gx;
          break;
        }
        case GdaMode::PartialGradient: {
          const Seed seed = config.seed.with_counter(config.seed.counter + static_cast<std::uint64_t>(s));
          const Trajectory tr = run(adv, oracle, x, seed);
          y = tr.final();
          const FullEval e = oracle.evaluate(x, y);
          rec.g_sample = e.value;
          rec.subgrad_norm = e.gx.norm();
          xe = x;
          ye = y;
          x -= config.eta_x * e.gx;
          break;
        }
      }
    } catch (const NumericFailure& e) {
      rep.termination = Termination::NumericFailure;
      rep.message = e.what();
      break;
    }
    if (!all_finite(x) || !all_finite(y)) {
      rep.termination = Termination::NumericFailure;
      rep.message = "baseline iterate became non-finite";
      break;
    }
    rec.wall_ms = ms_since(t0);
    rep.records.push_back(rec);
    rep.xs.push_back(x);
    rep.ys.push_back(y);
    if (config.on_step) config.on_step(rec, xe, ye);
  }
  return rep;
}

}  // namespace smoothmax
