#include "smoothmax/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace smoothmax {

Vector simplex_project(const Vector& v) {
  const Eigen::Index k = v.size();
  if (k < 1) throw std::invalid_argument("simplex_project: empty vector");
  if (!all_finite(v)) throw NumericFailure("simplex_project: non-finite input", v);
  std::vector<double> u(v.data(), v.data() + k);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    cum += u[static_cast<std::size_t>(i)];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (u[static_cast<std::size_t>(i)] - t > 0) tau = t;
  }
  Vector w = (v.array() - tau).cwiseMax(0.0);
  // Renormalise away the last few ulps so the sum is 1 to rounding.
  const double s = w.sum();
  if (s > 0) w /= s;
  return w;
}

namespace {

double qp_value(const Vector& a, const Matrix& K, const Vector& b, double c, const Vector& w) {
  return a.dot(w) - (w.dot(K * w) + 2.0 * b.dot(w)) / (2.0 * c);
}

}  // namespace

SimplexQpResult solve_simplex_qp(const Vector& a, const Matrix& K, const Vector& b, double c, double tol,
                                 int max_iter, const Vector& w0) {
  const Eigen::Index k = a.size();
  SimplexQpResult res;
  if (k == 1) {
    res.w = Vector::Ones(1);
    return res;
  }
  Vector w = w0.size() == k ? simplex_project(w0) : Vector::Constant(k, 1.0 / static_cast<double>(k));
  // lambda_max(K) / c via a Gershgorin bound.
  double lip = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) lip = std::max(lip, K.row(i).cwiseAbs().sum());
  lip /= c;
  auto grad = [&](const Vector& x) -> Vector { return a - (K * x + b) / c; };
  auto fw_gap = [&](const Vector& x, const Vector& g) { return g.maxCoeff() - g.dot(x); };

  if (lip <= 0) {
    // Linear objective: put all mass on the best coordinate.
    Eigen::Index best;
    a.maxCoeff(&best);
    res.w = Vector::Unit(k, best);
    return res;
  }
  const double step = 1.0 / lip;
  Vector yk = w;
  double tk = 1.0;
  double best_val = qp_value(a, K, b, c, w);
  Vector best_w = w;
  for (int it = 0; it < max_iter; ++it) {
    const Vector gw = grad(w);
    const double gap = fw_gap(w, gw);
    res.iterations = it;
    if (gap <= tol) {
      res.w = w;
      res.fw_gap = gap;
      return res;
    }
    Vector next = simplex_project(yk + step * grad(yk));
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    yk = next + ((tk - 1.0) / tn) * (next - w);
    tk = tn;
    w = std::move(next);
    const double val = qp_value(a, K, b, c, w);
    if (val < best_val) {
      // Restart momentum on non-monotone steps.
      yk = w;
      tk = 1.0;
    } else {
      best_val = val;
      best_w = w;
    }
  }
  res.w = qp_value(a, K, b, c, w) >= best_val ? w : best_w;
  res.fw_gap = fw_gap(res.w, grad(res.w));
  res.iterations = max_iter;
  return res;
}

}  // namespace smoothmax
