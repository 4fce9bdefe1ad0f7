#pragma once

#include "smoothmax/core.hpp"

namespace smoothmax {

/// Euclidean projection onto {w >= 0, sum w = 1} by sort-and-threshold.
Vector simplex_project(const Vector& v);

/// max over the simplex of  a.w - ||G w + r||^2 / (2c),  with K = G^T G and
/// b = G^T r supplied by the caller.
struct SimplexQpResult {
  Vector w;
  double fw_gap = 0.0;  // Frank-Wolfe duality gap at w
  int iterations = 0;
};

SimplexQpResult solve_simplex_qp(const Vector& a, const Matrix& K, const Vector& b, double c, double tol,
                                 int max_iter, const Vector& w0 = Vector());

}  // namespace smoothmax
