#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

using namespace smoothmax;
using namespace testing_helpers;

namespace {

SumQuadratic three_component() {
  Matrix C0(2, 3), C1(2, 3), C2(2, 3);
  C0 << 1, 0.5, 0, 0, 1, -0.3;
  C1 << -0.2, 1, 0.4, 0.7, 0, 1;
  C2 << 0.3, -0.6, 1, 1, 0.2, 0;
  return SumQuadratic({C0, C1, C2}, {0.8, 1.2, 0.5});
}

double vjp_fd_error(const AlgorithmSpec& spec, const MinimaxOracle& o, const Vector& x, const Vector& v,
                    const Seed& z) {
  const Trajectory tr = run(spec, o, x, z);
  const Vector a = vjp(spec, o, tr, v);
  const ScalarMap m = [&](const Vector& xx, Vector*) { return run(spec, o, xx, z).final().dot(v); };
  const Vector b = central_difference(m, x, 1e-6);
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST_CASE("SGA two-step hand computation") {
  const QuadraticGame q = make_quadratic_game(mat1(1), 1.0);
  const Trajectory tr = run(sga(0.5, 2), q, scalar(2), Seed{});
  REQUIRE(tr.ys.size() == 3);
  CHECK(tr.ys[1][0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(tr.ys[2][0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(tr.tildes.empty());
}

TEST_CASE("SNAG with theta = 1 reproduces SGA exactly") {
  const SumQuadratic f = three_component();
  AlgorithmSpec a = sga(0.1, 12, Initializer::normal(0.5));
  AlgorithmSpec b = a;
  b.kind = AlgorithmKind::SNAG;
  b.theta = 1.0;
  const Vector x = vec({0.3, -1.1});
  for (std::uint64_t c = 0; c < 5; ++c) {
    const Seed z{9, 0, c};
    const Trajectory ta = run(a, f, x, z), tb = run(b, f, x, z);
    for (std::size_t t = 0; t < ta.ys.size(); ++t) CHECK(ta.ys[t] == tb.ys[t]);
  }
}

TEST_CASE("T = 0 returns y0 regardless of x") {
  const DiracGan g = make_dirac_gan();
  const AlgorithmSpec s = sga(0.1, 0, Initializer::uniform(-0.1, 0.1));
  const Seed z{1, 0, 3};
  const Vector y0 = run(s, g, scalar(-2), z).final();
  CHECK(run(s, g, scalar(4), z).final() == y0);
  CHECK(std::abs(y0[0]) <= 0.1);
}

TEST_CASE("runs are bit-reproducible") {
  const SumQuadratic f = three_component();
  AlgorithmSpec s = sga(0.2, 20, Initializer::uniform(-1, 1));
  const Trajectory a = run(s, f, vec({1, 2}), Seed{3, 1, 4});
  const Trajectory b = run(s, f, vec({1, 2}), Seed{3, 1, 4});
  CHECK(a.schedule == b.schedule);
  for (std::size_t t = 0; t < a.ys.size(); ++t) CHECK(a.ys[t] == b.ys[t]);
}

TEST_CASE("schedules stay within the component range") {
  const SumQuadratic f = three_component();
  AlgorithmSpec s = sga(0.1, 30);
  const auto iid = draw_schedule(s, f.metadata(), Seed{5, 0, 0});
  REQUIRE(iid.size() == 30);
  for (int j : iid) CHECK((j >= 0 && j < 3));
  s.schedule = ScheduleKind::Epoch;
  const auto ep = draw_schedule(s, f.metadata(), Seed{5, 0, 0});
  for (int e = 0; e < 10; ++e) {
    std::vector<int> block(ep.begin() + 3 * e, ep.begin() + 3 * e + 3);
    std::sort(block.begin(), block.end());
    CHECK(block == std::vector<int>{0, 1, 2});
  }
  s.full_batch = true;
  for (int j : draw_schedule(s, f.metadata(), Seed{5, 0, 0})) CHECK(j == -1);
}

TEST_CASE("projected ascent clips to the box") {
  const QuadraticGame bil = make_quadratic_game(mat1(1), 0.0);
  AlgorithmSpec s = sga(0.2, 5);
  s.kind = AlgorithmKind::ProjectedSGA;
  s.box_lo = 0;
  s.box_hi = 1;
  const Trajectory tr = run(s, bil, scalar(4), Seed{});
  CHECK(tr.ys[1][0] == doctest::Approx(0.8));
  for (std::size_t t = 2; t < tr.ys.size(); ++t) CHECK(tr.ys[t][0] == 1.0);
  CHECK_THROWS_AS(vjp(s, bil, tr, scalar(1)), UnsupportedNonsmooth);
  CHECK_THROWS_AS(jacobian(s, bil, scalar(1), Seed{}), UnsupportedNonsmooth);
}

TEST_CASE("non-finite iterates report the step") {
  const CallbackOracle blow(
      [] {
        ProblemMetadata m;
        m.L = 1;
        return m;
      }(),
      [](const Vector&, const Vector& y) { return y[0] * y[0]; },
      [](const Vector&, const Vector&) { return scalar(0); },
      [](const Vector&, const Vector& y) { return scalar(y[0] > 1 ? std::nan("") : 1.0); });
  try {
    run(sga(1.0, 5), blow, scalar(0), Seed{});
    FAIL("expected NumericFailure");
  } catch (const NumericFailure& e) {
    REQUIRE(e.step());
    CHECK(*e.step() == 3);
  }
}

TEST_CASE("vjp closed forms") {
  const QuadraticGame bil = make_quadratic_game(mat1(1), 0.0);
  const AlgorithmSpec s = sga(0.1, 10);
  const Trajectory tr = run(s, bil, scalar(0.7), Seed{});
  CHECK(vjp(s, bil, tr, scalar(3))[0] == doctest::Approx(3.0).epsilon(1e-13));

  const QuadraticGame q = make_quadratic_game(mat1(1), 1.0);
  const AlgorithmSpec s2 = sga(0.5, 2);
  CHECK(vjp(s2, q, run(s2, q, scalar(1.3), Seed{}), scalar(2))[0] == doctest::Approx(1.5).epsilon(1e-14));

  const AlgorithmSpec s0 = sga(0.5, 0);
  CHECK(vjp(s0, q, run(s0, q, scalar(1.3), Seed{}), scalar(2)).isZero(0.0));
}

TEST_CASE("jacobian closed forms and consistency") {
  const QuadraticGame bil = make_quadratic_game(mat1(1), 0.0);
  const Matrix J = jacobian(sga(0.1, 10), bil, scalar(0.5), Seed{});
  REQUIRE(J.rows() == 1);
  REQUIRE(J.cols() == 1);
  CHECK(J(0, 0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(jacobian(sga(0.1, 0), bil, scalar(0.5), Seed{}).isZero(0.0));

  const SumQuadratic f = three_component();
  const AlgorithmSpec s = sga(0.15, 8, Initializer::normal(1));
  const Vector x = vec({0.4, -0.9});
  const Seed z{2, 0, 0};
  const Matrix Jf = jacobian(s, f, x, z);
  CHECK(Jf.rows() == 2);
  CHECK(Jf.cols() == 3);
  const Trajectory tr = run(s, f, x, z);
  for (std::uint64_t c = 0; c < 10; ++c) {
    const Vector v = draw_standard_normal(Seed{30, 0, c}, 3);
    CHECK((Jf * v - vjp(s, f, tr, v)).norm() <= 1e-12 * std::max(1.0, v.norm()));
  }
  CHECK_THROWS_AS(jacobian(s, f, x, z, 5), SizeLimitExceeded);
}

TEST_CASE("vjp agrees with finite differences for smooth specs") {
  const SumQuadratic f = three_component();
  const DiracGan g = make_dirac_gan();
  const CallbackOracle w = wavy_oracle(3);

  AlgorithmSpec sg = sga(0.1, 10, Initializer::uniform(-0.5, 0.5));
  AlgorithmSpec sn = sg;
  sn.kind = AlgorithmKind::SNAG;
  sn.theta = 0.6;
  AlgorithmSpec sw = sg;
  sw.eta = 0.05;
  AlgorithmSpec swn = sn;
  swn.eta = 0.05;
  for (std::uint64_t c = 0; c < 20; ++c) {
    const Seed z{40, 0, c};
    const Vector x2 = draw_uniform_in_box(Seed{41, 0, c}, -1, 1, 2, Role::Lab);
    const Vector v3 = draw_standard_normal(Seed{42, 0, c}, 3, Role::Lab);
    CHECK(vjp_fd_error(sg, f, x2, v3, z) <= 1e-5);
    CHECK(vjp_fd_error(sn, f, x2, v3, z) <= 1e-5);
    const Vector x1 = draw_uniform_in_box(Seed{43, 0, c}, -2, 2, 1, Role::Lab);
    const Vector v1 = draw_standard_normal(Seed{44, 0, c}, 1, Role::Lab);
    CHECK(vjp_fd_error(sg, g, x1, v1, z) <= 1e-5);
    CHECK(vjp_fd_error(sn, g, x1, v1, z) <= 1e-5);
    const Vector x3 = draw_uniform_in_box(Seed{45, 0, c}, -1, 1, 3, Role::Lab);
    CHECK(vjp_fd_error(sw, w, x3, v3, z) <= 1e-5);
    CHECK(vjp_fd_error(swn, w, x3, v3, z) <= 1e-5);
  }
}

TEST_CASE("vjp is linear in v") {
  const SumQuadratic f = three_component();
  AlgorithmSpec s = sga(0.1, 10, Initializer::normal(1));
  s.kind = AlgorithmKind::SNAG;
  s.theta = 0.5;
  const Trajectory tr = run(s, f, vec({0.2, 0.3}), Seed{6, 0, 0});
  const Vector v = vec({1, -2, 0.5}), w = vec({0.3, 0.1, -1});
  const Vector lhs = vjp(s, f, tr, 2.5 * v - 1.5 * w);
  const Vector rhs = 2.5 * vjp(s, f, tr, v) - 1.5 * vjp(s, f, tr, w);
  CHECK((lhs - rhs).norm() <= 1e-12 * std::max(1.0, rhs.norm()));
}

TEST_CASE("certificate arithmetic") {
  ProblemMetadata m;
  m.L = 1;
  m.G = 1;
  m.B = 1;
  m.rho = 0.5;
  const auto gen = theoretical_smoothness(sga(0.1, 10), m, Regime::General);
  CHECK(gen.G_prime == doctest::Approx(std::pow(1.1, 10)).epsilon(1e-14));
  CHECK(gen.G_prime == doctest::Approx(2.59374).epsilon(1e-6));
  CHECK(gen.L_prime == doctest::Approx(4 * 0.5 * std::pow(1.1, 20)).epsilon(1e-14));

  m.concave_in_y = true;
  const auto conc = theoretical_smoothness(sga(0.1, 10), m, Regime::Concave);
  CHECK(conc.G_prime == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(conc.L_prime == doctest::Approx(0.5 * 8.0).epsilon(1e-14));

  m.alpha = 0.5;
  const auto sc = theoretical_smoothness(sga(0.1, 10), m, Regime::StronglyConcave);
  CHECK(sc.G_prime == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(sc.L_prime == doctest::Approx(4 * 0.5 * 8.0).epsilon(1e-14));

  // tightest admissible: concave 1.0 beats kappa 2 and 1.1^10
  CHECK(theoretical_smoothness(sga(0.1, 10), m).regime == Regime::Concave);
  CHECK(theoretical_smoothness(sga(0.1, 30), m).regime == Regime::StronglyConcave);

  AlgorithmSpec snag = sga(0.1, 10);
  snag.kind = AlgorithmKind::SNAG;
  snag.theta = 0.5;
  const auto sn = theoretical_smoothness(snag, m);
  CHECK(sn.regime == Regime::General);
  CHECK(sn.G_prime == doctest::Approx(10 * std::pow(1.2, 10)).epsilon(1e-14));
  CHECK(sn.L_prime == doctest::Approx(50 * 0.5 * 1000 * std::pow(1.2, 20)).epsilon(1e-14));
  CHECK_THROWS_AS(theoretical_smoothness(snag, m, Regime::Concave), UnsupportedRegime);
}

TEST_CASE("regimes require their hypotheses") {
  ProblemMetadata m;
  m.L = 1;
  CHECK_THROWS_AS(theoretical_smoothness(sga(0.1, 5), m, Regime::Concave), UnsupportedRegime);
  CHECK_THROWS_AS(theoretical_smoothness(sga(0.1, 5), m, Regime::StronglyConcave), UnsupportedRegime);
  m.concave_in_y = true;
  CHECK_THROWS_AS(theoretical_smoothness(sga(2.0, 5), m, Regime::Concave), UnsupportedRegime);
  CHECK(admissible_regimes(sga(0.1, 5), m).size() == 2);
}

TEST_CASE("spec validation") {
  AlgorithmSpec s = sga(0.0, 1);
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = sga(0.1, -1);
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = sga(0.1, 1);
  s.kind = AlgorithmKind::SNAG;
  s.theta = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK(parse_algorithm_kind(to_string(AlgorithmKind::ProjectedSGA)) == AlgorithmKind::ProjectedSGA);
  CHECK(parse_regime("strongly_concave") == Regime::StronglyConcave);
  CHECK_THROWS(parse_regime("convex"));
}
