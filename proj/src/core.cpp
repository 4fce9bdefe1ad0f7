#include "smoothmax/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace smoothmax {

bool all_finite(const Vector& v) { return v.allFinite(); }

namespace {

void require_finite(const Vector& out, const Vector& x, const Vector& y, const char* what) {
  if (!all_finite(out)) {
    Vector w(x.size() + y.size());
    w << x, y;
    throw NumericFailure(std::string(what) + ": non-finite oracle output", w);
  }
}

std::string dims_message(const char* what, long got, long want) {
  std::ostringstream os;
  os << what << " has length " << got << ", expected " << want;
  return os.str();
}

}  // namespace

void ProblemMetadata::validate() const {
  if (d1 <= 0 || d2 <= 0) throw std::invalid_argument("metadata: dimensions must be positive");
  if (n_components < 1) throw std::invalid_argument("metadata: n_components must be >= 1");
  if (!(B >= 0) || !(G >= 0) || !(L >= 0) || !(rho >= 0))
    throw std::invalid_argument("metadata: B, G, L, rho must be nonnegative");
  if (alpha) {
    if (!(*alpha > 0)) throw std::invalid_argument("metadata: alpha must be positive");
    if (*alpha > L) throw std::invalid_argument("metadata: alpha must not exceed L");
  }
}

double ProblemMetadata::kappa() const {
  if (!alpha) throw std::invalid_argument("metadata: kappa needs alpha");
  return L / *alpha;
}

// ---- MinimaxOracle defaults -----------------------------------------------

void MinimaxOracle::check_dims(const Vector& x, const Vector& y) const {
  if (x.size() != d1()) throw std::invalid_argument(dims_message("x", x.size(), d1()));
  if (y.size() != d2()) throw std::invalid_argument(dims_message("y", y.size(), d2()));
}

FullEval MinimaxOracle::evaluate(const Vector& x, const Vector& y, Component j) const {
  return {value(x, y, j), grad_x(x, y, j), grad_y(x, y, j)};
}

Vector MinimaxOracle::hvp_yy(const Vector& x, const Vector& y, const Vector& v, Component j) const {
  const double n = v.norm();
  if (n == 0.0) return Vector::Zero(d2());
  return n * fd_hvp_yy(*this, x, y, v / n, j);
}

Vector MinimaxOracle::hvp_xy(const Vector& x, const Vector& y, const Vector& v, Component j) const {
  const double n = v.norm();
  if (n == 0.0) return Vector::Zero(d1());
  return n * fd_hvp_xy(*this, x, y, v / n, j);
}

std::pair<Vector, Vector> MinimaxOracle::hvp_pair(const Vector& x, const Vector& y, const Vector& v,
                                                  Component j) const {
  if (has_analytic_hvp()) return {hvp_yy(x, y, v, j), hvp_xy(x, y, v, j)};
  const double n = v.norm();
  if (n == 0.0) return {Vector::Zero(d2()), Vector::Zero(d1())};
  const Vector u = v / n;
  const double h = default_fd_step(u);
  const FullEval plus = evaluate(x, y + h * u, j);
  const FullEval minus = evaluate(x, y - h * u, j);
  Vector hyy = (plus.gy - minus.gy) * (n / (2.0 * h));
  Vector hxy = (plus.gx - minus.gx) * (n / (2.0 * h));
  require_finite(hyy, x, y, "hvp_pair");
  require_finite(hxy, x, y, "hvp_pair");
  return {std::move(hyy), std::move(hxy)};
}

Vector MinimaxOracle::default_y0(const Seed&) const { return Vector::Zero(d2()); }

// ---- CallbackOracle ----------------------------------------------------------

CallbackOracle::CallbackOracle(ProblemMetadata meta, ValueFn value, GradFn gx, GradFn gy, HvpFn hyy,
                               HvpFn hxy)
    : meta_(meta),
      value_(std::move(value)),
      gx_(std::move(gx)),
      gy_(std::move(gy)),
      hyy_(std::move(hyy)),
      hxy_(std::move(hxy)) {
  meta_.validate();
}

double CallbackOracle::value(const Vector& x, const Vector& y, Component) const {
  check_dims(x, y);
  return value_(x, y);
}

Vector CallbackOracle::grad_x(const Vector& x, const Vector& y, Component) const {
  check_dims(x, y);
  return gx_(x, y);
}

Vector CallbackOracle::grad_y(const Vector& x, const Vector& y, Component) const {
  check_dims(x, y);
  return gy_(x, y);
}

Vector CallbackOracle::hvp_yy(const Vector& x, const Vector& y, const Vector& v, Component j) const {
  if (!hyy_) return MinimaxOracle::hvp_yy(x, y, v, j);
  check_dims(x, y);
  return hyy_(x, y, v);
}

Vector CallbackOracle::hvp_xy(const Vector& x, const Vector& y, const Vector& v, Component j) const {
  if (!hxy_) return MinimaxOracle::hvp_xy(x, y, v, j);
  check_dims(x, y);
  return hxy_(x, y, v);
}

std::pair<Vector, Vector> CallbackOracle::hvp_pair(const Vector& x, const Vector& y, const Vector& v,
                                                   Component j) const {
  if (hyy_ || hxy_) return {hvp_yy(x, y, v, j), hvp_xy(x, y, v, j)};
  return MinimaxOracle::hvp_pair(x, y, v, j);
}

// ---- ComponentOracle -----------------------------------------------------------

ComponentOracle::ComponentOracle(const MinimaxOracle& parent, int j)
    : parent_(parent), j_(j), meta_(parent.metadata()) {
  if (j < 0 || j >= parent.metadata().n_components)
    throw std::invalid_argument("ComponentOracle: component index out of range");
  meta_.n_components = 1;
}

double ComponentOracle::value(const Vector& x, const Vector& y, Component j) const {
  return parent_.value(x, y, pick(j));
}
Vector ComponentOracle::grad_x(const Vector& x, const Vector& y, Component j) const {
  return parent_.grad_x(x, y, pick(j));
}
Vector ComponentOracle::grad_y(const Vector& x, const Vector& y, Component j) const {
  return parent_.grad_y(x, y, pick(j));
}
FullEval ComponentOracle::evaluate(const Vector& x, const Vector& y, Component j) const {
  return parent_.evaluate(x, y, pick(j));
}
Vector ComponentOracle::hvp_yy(const Vector& x, const Vector& y, const Vector& v, Component j) const {
  return parent_.hvp_yy(x, y, v, pick(j));
}
Vector ComponentOracle::hvp_xy(const Vector& x, const Vector& y, const Vector& v, Component j) const {
  return parent_.hvp_xy(x, y, v, pick(j));
}
std::pair<Vector, Vector> ComponentOracle::hvp_pair(const Vector& x, const Vector& y, const Vector& v,
                                                    Component j) const {
  return parent_.hvp_pair(x, y, v, pick(j));
}

// ---- finite differences -----------------------------------------------------

double default_fd_step(const Vector& v) { return 1e-5 * (1.0 + v.norm()); }

Vector fd_hvp_yy(const MinimaxOracle& oracle, const Vector& x, const Vector& y, const Vector& v,
                 Component j, std::optional<double> h) {
  const double step = h.value_or(default_fd_step(v));
  if (!(step > 0)) throw std::invalid_argument("fd_hvp_yy: step must be positive");
  if (v.size() != oracle.d2()) throw std::invalid_argument(dims_message("v", v.size(), oracle.d2()));
  if (v.isZero(0.0)) return Vector::Zero(oracle.d2());
  Vector out = (oracle.grad_y(x, y + step * v, j) - oracle.grad_y(x, y - step * v, j)) / (2.0 * step);
  require_finite(out, x, y, "fd_hvp_yy");
  return out;
}

Vector fd_hvp_xy(const MinimaxOracle& oracle, const Vector& x, const Vector& y, const Vector& v,
                 Component j, std::optional<double> h) {
  const double step = h.value_or(default_fd_step(v));
  if (!(step > 0)) throw std::invalid_argument("fd_hvp_xy: step must be positive");
  if (v.size() != oracle.d2()) throw std::invalid_argument(dims_message("v", v.size(), oracle.d2()));
  if (v.isZero(0.0)) return Vector::Zero(oracle.d1());
  Vector out = (oracle.grad_x(x, y + step * v, j) - oracle.grad_x(x, y - step * v, j)) / (2.0 * step);
  require_finite(out, x, y, "fd_hvp_xy");
  return out;
}

Vector central_difference(const ScalarMap& map, const Vector& x, double h) {
  if (!(h > 0)) throw std::invalid_argument("central_difference: step must be positive");
  Vector out(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    // use the representable spacing so the quotient has no step rounding
    const double hi = x[i] + h, lo = x[i] - h;
    probe[i] = hi;
    const double up = map(probe, nullptr);
    probe[i] = lo;
    const double down = map(probe, nullptr);
    probe[i] = x[i];
    out[i] = (up - down) / (hi - lo);
  }
  if (!all_finite(out)) throw NumericFailure("central_difference: non-finite value", x);
  return out;
}

double gradient_check(const ScalarMap& map, const Vector& x, double h) {
  Vector analytic(x.size());
  map(x, &analytic);
  if (!all_finite(analytic)) throw NumericFailure("gradient_check: non-finite gradient", x);
  const Vector numeric = central_difference(map, x, h);
  return (analytic - numeric).norm() / std::max(1.0, numeric.norm());
}

// ---- empirical constants ------------------------------------------------------

namespace {

Vector joint_grad(const MinimaxOracle& o, const Vector& w) {
  const int d1 = o.d1();
  const FullEval e = o.evaluate(w.head(d1), w.tail(o.d2()));
  Vector g(w.size());
  g << e.gx, e.gy;
  return g;
}

Vector joint_hvp(const MinimaxOracle& o, const Vector& w, const Vector& u, double h) {
  return (joint_grad(o, w + h * u) - joint_grad(o, w - h * u)) / (2.0 * h);
}

Vector unit_start(Eigen::Index n) {
  Vector u = Vector::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) u[i] += 0.1 * static_cast<double>(i % 7);
  return u.normalized();
}

// Largest |eigenvalue| of a symmetric operator by power iteration.
template <class Op>
double power_norm(Op op, Eigen::Index n, int iters) {
  Vector u = unit_start(n);
  double est = 0.0;
  for (int k = 0; k < iters; ++k) {
    Vector hu = op(u);
    const double nrm = hu.norm();
    if (nrm == 0.0) return 0.0;
    est = nrm;
    u = hu / nrm;
  }
  return est;
}

}  // namespace

ProblemMetadata estimate_metadata(const MinimaxOracle& oracle, const PointSampler& sampler,
                                  const Seed& seed, const EstimateOptions& opts) {
  ProblemMetadata m = oracle.metadata();
  m.B = m.G = m.L = m.rho = 0.0;
  m.alpha.reset();
  m.concave_in_y = false;
  m.source = ConstantsSource::Estimated;
  const double h = 1e-5;
  const Eigen::Index n = m.d1 + m.d2;
  for (int p = 0; p < opts.n_points; ++p) {
    const auto [x, y] = sampler(seed.with_counter(seed.counter + static_cast<std::uint64_t>(p)));
    Vector w(n);
    w << x, y;
    const FullEval e = oracle.evaluate(x, y);
    m.B = std::max(m.B, std::abs(e.value));
    m.G = std::max(m.G, std::hypot(e.gx.norm(), e.gy.norm()));
    m.L = std::max(m.L, power_norm([&](const Vector& u) { return joint_hvp(oracle, w, u, h); }, n,
                                   opts.power_iterations));
    const Vector shift = opts.pair_distance * unit_start(n);
    const Vector w2 = w + shift;
    const double diff = power_norm(
        [&](const Vector& u) { return Vector(joint_hvp(oracle, w, u, h) - joint_hvp(oracle, w2, u, h)); },
        n, opts.power_iterations);
    m.rho = std::max(m.rho, diff / shift.norm());
  }
  return m;
}

}  // namespace smoothmax
