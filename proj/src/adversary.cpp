#include "smoothmax/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace smoothmax {

std::string to_string(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::SGA: return "sga";
    case AlgorithmKind::SNAG: return "snag";
    case AlgorithmKind::ProjectedSGA: return "projected_sga";
  }
  return "?";
}

std::string to_string(ScheduleKind k) { return k == ScheduleKind::Iid ? "iid" : "epoch"; }

std::string to_string(Regime r) {
  switch (r) {
    case Regime::General: return "general";
    case Regime::Concave: return "concave";
    case Regime::StronglyConcave: return "strongly_concave";
  }
  return "?";
}

AlgorithmKind parse_algorithm_kind(const std::string& s) {
  if (s == "sga") return AlgorithmKind::SGA;
  if (s == "snag") return AlgorithmKind::SNAG;
  if (s == "projected_sga") return AlgorithmKind::ProjectedSGA;
  throw std::invalid_argument("unknown algorithm kind '" + s + "'");
}

ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "iid") return ScheduleKind::Iid;
  if (s == "epoch") return ScheduleKind::Epoch;
  throw std::invalid_argument("unknown schedule '" + s + "'");
}

Regime parse_regime(const std::string& s) {
  if (s == "general") return Regime::General;
  if (s == "concave") return Regime::Concave;
  if (s == "strongly_concave") return Regime::StronglyConcave;
  throw std::invalid_argument("unknown regime '" + s + "'");
}

// ---- initializer --------------------------------------------------------------

Initializer Initializer::uniform(double lo, double hi) {
  Initializer i;
  i.kind = Kind::Uniform;
  i.lo = lo;
  i.hi = hi;
  return i;
}

Initializer Initializer::fixed(Vector v) {
  Initializer i;
  i.kind = Kind::Fixed;
  i.value = std::move(v);
  return i;
}

Initializer Initializer::normal(double scale) {
  Initializer i;
  i.kind = Kind::Normal;
  i.scale = scale;
  return i;
}

Initializer Initializer::oracle_default() {
  Initializer i;
  i.kind = Kind::OracleDefault;
  return i;
}

Vector Initializer::draw(const Seed& seed, const MinimaxOracle& oracle) const {
  const int d2 = oracle.d2();
  switch (kind) {
    case Kind::Zero: return Vector::Zero(d2);
    case Kind::Uniform: return draw_uniform_in_box(seed, lo, hi, d2, Role::AdversaryInit);
    case Kind::Fixed:
      if (value.size() != d2) throw std::invalid_argument("fixed initializer has wrong length");
      return value;
    case Kind::Normal: return scale * draw_standard_normal(seed, d2, Role::AdversaryInit);
    case Kind::OracleDefault: return oracle.default_y0(seed);
  }
  return Vector::Zero(d2);
}

// ---- spec -----------------------------------------------------------------------

void AlgorithmSpec::validate() const {
  if (!(eta > 0) || !std::isfinite(eta)) throw std::invalid_argument("algorithm: eta must be positive");
  if (T < 0) throw std::invalid_argument("algorithm: T must be >= 0");
  if (kind == AlgorithmKind::SNAG && !(theta > 0 && theta <= 1))
    throw std::invalid_argument("algorithm: theta must lie in (0, 1]");
  if (kind == AlgorithmKind::ProjectedSGA && !(box_lo <= box_hi))
    throw std::invalid_argument("algorithm: empty box");
  if (init.kind == Initializer::Kind::Uniform && !(init.lo <= init.hi))
    throw std::invalid_argument("algorithm: empty initializer window");
}

std::vector<int> draw_schedule(const AlgorithmSpec& spec, const ProblemMetadata& meta, const Seed& seed) {
  std::vector<int> sched(static_cast<std::size_t>(spec.T), -1);
  const int n = meta.n_components;
  if (spec.full_batch || spec.T == 0) return sched;
  if (n == 1) {
    std::fill(sched.begin(), sched.end(), 0);
    return sched;
  }
  CounterRng rng(seed, Role::Minibatch);
  if (spec.schedule == ScheduleKind::Iid) {
    for (auto& s : sched) s = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    return sched;
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::size_t pos = perm.size();
  for (auto& s : sched) {
    if (pos == perm.size()) {
      for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
      for (int i = n - 1; i > 0; --i)
        std::swap(perm[static_cast<std::size_t>(i)],
                  perm[rng.below(static_cast<std::uint64_t>(i) + 1)]);
      pos = 0;
    }
    s = perm[pos++];
  }
  return sched;
}

// ---- forward ----------------------------------------------------------------------

namespace {

Component as_component(int s) { return s < 0 ? Component() : Component(s); }

void check_iterate(const Vector& y, const Vector& x, long t) {
  if (!all_finite(y)) {
    std::ostringstream os;
    os << "adversary iterate became non-finite at step " << t;
    throw NumericFailure(os.str(), x, t);
  }
}

}  // namespace

Trajectory run(const AlgorithmSpec& spec, const MinimaxOracle& oracle, const Vector& x, const Seed& seed) {
  spec.validate();
  if (x.size() != oracle.d1()) throw std::invalid_argument("run: x has wrong length");
  Trajectory tr;
  tr.x = x;
  tr.seed = seed;
  tr.schedule = draw_schedule(spec, oracle.metadata(), seed);
  tr.ys.reserve(static_cast<std::size_t>(spec.T) + 1);
  Vector y = spec.init.draw(seed, oracle);
  if (spec.kind == AlgorithmKind::ProjectedSGA) y = y.cwiseMax(spec.box_lo).cwiseMin(spec.box_hi);
  tr.ys.push_back(y);

  const bool momentum = spec.kind == AlgorithmKind::SNAG;
  if (momentum) tr.tildes.reserve(static_cast<std::size_t>(spec.T));
  for (int t = 0; t < spec.T; ++t) {
    const Component j = as_component(tr.schedule[static_cast<std::size_t>(t)]);
    const Vector& yt = tr.ys.back();
    Vector next;
    if (momentum) {
      const Vector& prev = t == 0 ? yt : tr.ys[tr.ys.size() - 2];
      Vector tilde = yt + (1.0 - spec.theta) * (yt - prev);
      next = tilde + spec.eta * oracle.grad_y(x, tilde, j);
      tr.tildes.push_back(std::move(tilde));
    } else {
      next = yt + spec.eta * oracle.grad_y(x, yt, j);
      if (spec.kind == AlgorithmKind::ProjectedSGA) next = next.cwiseMax(spec.box_lo).cwiseMin(spec.box_hi);
    }
    check_iterate(next, x, t + 1);
    tr.ys.push_back(std::move(next));
  }
  return tr;
}

// ---- reverse ------------------------------------------------------------------------

// Adjoint of y_{t+1} = yt~ + eta grad_y f(x, yt~) with yt~ = (2-theta) y_t - (1-theta) y_{t-1};
// SGA is theta = 1. y_{-1} = y_0 and y_0 does not depend on x, so w_0 is dropped.
Vector vjp(const AlgorithmSpec& spec, const MinimaxOracle& oracle, const Trajectory& traj, const Vector& v) {
  if (!spec.smooth())
    throw UnsupportedNonsmooth("vjp: projected ascent is not differentiable at the box boundary");
  if (v.size() != oracle.d2()) throw std::invalid_argument("vjp: v has wrong length");
  const int T = traj.steps();
  Vector result = Vector::Zero(oracle.d1());
  if (T == 0) return result;
  const double theta = spec.kind == AlgorithmKind::SNAG ? spec.theta : 1.0;
  std::vector<Vector> w(static_cast<std::size_t>(T) + 1, Vector::Zero(oracle.d2()));
  w[static_cast<std::size_t>(T)] = v;
  for (int t = T - 1; t >= 0; --t) {
    const Vector& wn = w[static_cast<std::size_t>(t) + 1];
    if (wn.isZero(0.0)) continue;
    const Component j = as_component(traj.schedule[static_cast<std::size_t>(t)]);
    const auto [hyy, hxy] = oracle.hvp_pair(traj.x, traj.eval_point(t), wn, j);
    result.noalias() += spec.eta * hxy;
    if (t == 0) break;
    const Vector u = wn + spec.eta * hyy;
    w[static_cast<std::size_t>(t)] += (2.0 - theta) * u;
    if (theta != 1.0) w[static_cast<std::size_t>(t) - 1] -= (1.0 - theta) * u;
  }
  if (!all_finite(result)) throw NumericFailure("vjp: non-finite adjoint", traj.x);
  return result;
}

Matrix jacobian(const AlgorithmSpec& spec, const MinimaxOracle& oracle, const Vector& x, const Seed& seed,
                long cap) {
  const long d1 = oracle.d1(), d2 = oracle.d2();
  if (d1 * d2 > cap) {
    std::ostringstream os;
    os << "jacobian: " << d1 << "x" << d2 << " exceeds the dense cap of " << cap << " entries";
    throw SizeLimitExceeded(os.str());
  }
  if (!spec.smooth()) throw UnsupportedNonsmooth("jacobian: projected ascent is not differentiable");
  const Trajectory tr = run(spec, oracle, x, seed);
  Matrix J(d1, d2);
  for (long c = 0; c < d2; ++c) J.col(c) = vjp(spec, oracle, tr, Vector::Unit(d2, c));
  return J;
}

// ---- certificates -----------------------------------------------------------------------

namespace {

double rho_over_L(const ProblemMetadata& m) { return m.L > 0 ? m.rho / m.L : 0.0; }

SmoothnessCertificate certificate_for(const AlgorithmSpec& spec, const ProblemMetadata& m, Regime r) {
  const double eta = spec.eta, L = m.L, T = spec.T, q = rho_over_L(m);
  SmoothnessCertificate c;
  c.regime = r;
  if (spec.kind == AlgorithmKind::SNAG) {
    const double base = 1.0 + eta * L / spec.theta;
    c.G_prime = T * std::pow(base, T);
    c.L_prime = 50.0 * q * T * T * T * std::pow(base, 2.0 * T);
    return c;
  }
  switch (r) {
    case Regime::General:
      c.G_prime = std::pow(1.0 + eta * L, T);
      c.L_prime = 4.0 * q * std::pow(1.0 + eta * L, 2.0 * T);
      break;
    case Regime::Concave:
      c.G_prime = eta * L * T;
      c.L_prime = q * std::pow(1.0 + eta * L * T, 3.0);
      break;
    case Regime::StronglyConcave: {
      const double kappa = m.kappa();
      c.G_prime = kappa;
      c.L_prime = 4.0 * q * kappa * kappa * kappa;
      break;
    }
  }
  return c;
}

}  // namespace

std::vector<Regime> admissible_regimes(const AlgorithmSpec& spec, const ProblemMetadata& meta) {
  std::vector<Regime> out{Regime::General};
  if (spec.kind == AlgorithmKind::SNAG) return out;
  const bool small_step = spec.eta * meta.L <= 1.0;
  if (meta.concave_in_y && small_step) out.push_back(Regime::Concave);
  if (meta.alpha && small_step) out.push_back(Regime::StronglyConcave);
  return out;
}

SmoothnessCertificate theoretical_smoothness(const AlgorithmSpec& spec, const ProblemMetadata& meta,
                                             std::optional<Regime> regime) {
  spec.validate();
  meta.validate();
  if (spec.kind == AlgorithmKind::SNAG && regime && *regime != Regime::General)
    throw UnsupportedRegime("SNAG smoothness is only established for the general regime");
  const auto ok = admissible_regimes(spec, meta);
  if (regime) {
    if (std::find(ok.begin(), ok.end(), *regime) == ok.end())
      throw UnsupportedRegime("metadata or step size does not support the " + to_string(*regime) +
                              " regime (needs the structural flag and eta <= 1/L)");
    return certificate_for(spec, meta, *regime);
  }
  SmoothnessCertificate best = certificate_for(spec, meta, ok.front());
  for (std::size_t i = 1; i < ok.size(); ++i) {
    const SmoothnessCertificate c = certificate_for(spec, meta, ok[i]);
    if (c.G_prime < best.G_prime || (c.G_prime == best.G_prime && c.L_prime < best.L_prime)) best = c;
  }
  return best;
}

}  // namespace smoothmax
