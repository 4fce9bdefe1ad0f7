#pragma once

#include <cmath>
#include <vector>

#include "smoothmax/problems.hpp"

namespace testing_helpers {

using namespace smoothmax;

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) out[i++] = a;
  return out;
}

inline Vector scalar(double a) { return Vector::Constant(1, a); }

inline Matrix mat1(double a) { return Matrix::Constant(1, 1, a); }

inline double rel_err(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

/// f = (1/n) sum_j [x^T C_j y - (a_j/2) ||y||^2]; finite-sum testbed with analytic HVPs.
class SumQuadratic : public MinimaxOracle {
 public:
  SumQuadratic(std::vector<Matrix> C, std::vector<double> a) : C_(std::move(C)), a_(std::move(a)) {
    meta_.d1 = static_cast<int>(C_[0].rows());
    meta_.d2 = static_cast<int>(C_[0].cols());
    meta_.n_components = static_cast<int>(C_.size());
    double L = 0.0, amin = a_[0];
    for (std::size_t j = 0; j < C_.size(); ++j) {
      Matrix H = Matrix::Zero(meta_.d1 + meta_.d2, meta_.d1 + meta_.d2);
      H.topRightCorner(meta_.d1, meta_.d2) = C_[j];
      H.bottomLeftCorner(meta_.d2, meta_.d1) = C_[j].transpose();
      H.bottomRightCorner(meta_.d2, meta_.d2) = -a_[j] * Matrix::Identity(meta_.d2, meta_.d2);
      L = std::max(L, Eigen::SelfAdjointEigenSolver<Matrix>(H).eigenvalues().cwiseAbs().maxCoeff());
      amin = std::min(amin, a_[j]);
    }
    meta_.L = L;
    meta_.G = 2 * L;
    meta_.B = 2 * L;
    meta_.concave_in_y = amin >= 0;
    if (amin > 0) meta_.alpha = amin;
  }

  const ProblemMetadata& metadata() const override { return meta_; }
  double value(const Vector& x, const Vector& y, Component j = std::nullopt) const override {
    return avg(j, [&](int k) { return x.dot(C_[k] * y) - 0.5 * a_[k] * y.squaredNorm(); });
  }
  Vector grad_x(const Vector&, const Vector& y, Component j = std::nullopt) const override {
    return avgv(j, [&](int k) { return Vector(C_[k] * y); }, meta_.d1);
  }
  Vector grad_y(const Vector& x, const Vector& y, Component j = std::nullopt) const override {
    return avgv(j, [&](int k) { return Vector(C_[k].transpose() * x - a_[k] * y); }, meta_.d2);
  }
  bool has_analytic_hvp() const override { return true; }
  Vector hvp_yy(const Vector&, const Vector&, const Vector& v, Component j = std::nullopt) const override {
    return avgv(j, [&](int k) { return Vector(-a_[k] * v); }, meta_.d2);
  }
  Vector hvp_xy(const Vector&, const Vector&, const Vector& v, Component j = std::nullopt) const override {
    return avgv(j, [&](int k) { return Vector(C_[k] * v); }, meta_.d1);
  }

 private:
  template <class F>
  double avg(Component j, F f) const {
    if (j) return f(*j);
    double s = 0;
    for (int k = 0; k < meta_.n_components; ++k) s += f(k);
    return s / meta_.n_components;
  }
  template <class F>
  Vector avgv(Component j, F f, int d) const {
    if (j) return f(*j);
    Vector s = Vector::Zero(d);
    for (int k = 0; k < meta_.n_components; ++k) s += f(k);
    return s / meta_.n_components;
  }
  std::vector<Matrix> C_;
  std::vector<double> a_;
  ProblemMetadata meta_;
};

/// Nonlinear oracle in arbitrary dimension without analytic HVPs:
/// f = sum_i x_i sin(y_i) - (1/4) sum_i y_i^2 + (1/6) (sum_i y_i)^3 / d.
inline CallbackOracle wavy_oracle(int d) {
  ProblemMetadata m;
  m.d1 = m.d2 = d;
  m.L = 10;
  m.G = 10;
  m.B = 10;
  auto value = [d](const Vector& x, const Vector& y) {
    const double s = y.sum();
    return x.dot(y.array().sin().matrix()) - 0.25 * y.squaredNorm() + s * s * s / (6.0 * d);
  };
  auto gx = [](const Vector&, const Vector& y) { return Vector(y.array().sin().matrix()); };
  auto gy = [d](const Vector& x, const Vector& y) {
    const double s = y.sum();
    Vector g = (x.array() * y.array().cos()).matrix() - 0.5 * y;
    g.array() += s * s / (2.0 * d);
    return g;
  };
  return CallbackOracle(m, value, gx, gy);
}

inline AlgorithmSpec sga(double eta, int T, Initializer init = Initializer::zero()) {
  AlgorithmSpec s;
  s.kind = AlgorithmKind::SGA;
  s.eta = eta;
  s.T = T;
  s.init = init;
  return s;
}

}  // namespace testing_helpers
