#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

using namespace smoothmax;
using namespace testing_helpers;

namespace {

MaxOfSmooth two_parabolas() {
  return MaxOfSmooth(1, {[](const Vector& x) { return ValueGrad{x[0] * x[0], scalar(2 * x[0])}; },
                         [](const Vector& x) { return ValueGrad{2 * x[0] * x[0], scalar(4 * x[0])}; }});
}

}  // namespace

TEST_CASE("total gradient closed forms") {
  const QuadraticGame bil = make_quadratic_game(mat1(1), 0.0);
  const AlgorithmSpec s = sga(0.1, 10);
  const TotalGradient tg = total_gradient(bil, s, scalar(1), Seed{});
  CHECK(tg.value == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(tg.gradient[0] == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(partial_gradient(bil, s, scalar(1), Seed{}).gradient[0] == doctest::Approx(1.0).epsilon(1e-13));

  const QuadraticGame q = make_quadratic_game(mat1(1), 1.0);
  const TotalGradient tq = total_gradient(q, sga(0.5, 2), scalar(1), Seed{});
  CHECK(tq.value == doctest::Approx(0.46875).epsilon(1e-14));
  CHECK(tq.gradient[0] == doctest::Approx(0.9375).epsilon(1e-14));
}

TEST_CASE("T = 0 total gradient is the partial gradient at y0") {
  const DiracGan g = make_dirac_gan();
  const AlgorithmSpec s = sga(0.1, 0, Initializer::uniform(-1, 1));
  const Seed z{3, 0, 0};
  const Vector y0 = run(s, g, scalar(0.5), z).final();
  CHECK(total_gradient(g, s, scalar(0.5), z).gradient == g.grad_x(scalar(0.5), y0));
}

TEST_CASE("total gradient matches finite differences") {
  const DiracGan g = make_dirac_gan();
  const CallbackOracle w = wavy_oracle(3);
  AlgorithmSpec s = sga(0.1, 10, Initializer::uniform(-0.1, 0.1));
  AlgorithmSpec sw = sga(0.05, 8, Initializer::normal(0.3));
  sw.kind = AlgorithmKind::SNAG;
  sw.theta = 0.7;
  for (std::uint64_t c = 0; c < 100; ++c) {
    const Seed z{50, 0, c};
    const ScalarMap mg = [&](const Vector& x, Vector* gr) {
      const TotalGradient t = total_gradient(g, s, x, z);
      if (gr) *gr = t.gradient;
      return t.value;
    };
    CHECK(gradient_check(mg, draw_uniform_in_box(Seed{51, 0, c}, -2, 2, 1, Role::Lab)) <= 1e-5);
    if (c % 5 == 0) {
      const ScalarMap mw = [&](const Vector& x, Vector* gr) {
        const TotalGradient t = total_gradient(w, sw, x, z);
        if (gr) *gr = t.gradient;
        return t.value;
      };
      CHECK(gradient_check(mw, draw_uniform_in_box(Seed{52, 0, c}, -1, 1, 3, Role::Lab)) <= 1e-5);
    }
  }
}

TEST_CASE("single-algorithm subgradient is the total gradient") {
  const DiracGan g = make_dirac_gan();
  const AlgorithmSpec s = sga(0.1, 10, Initializer::uniform(-0.1, 0.1));
  const Toolkit tk = Toolkit::single(s);
  const Seed step{7, 0, 3};
  const SubgradientSample ss = sample_subgradient(tk, g, scalar(0.8), step);
  const TotalGradient tg = total_gradient(g, s, scalar(0.8), tk.seed_for(0, step));
  CHECK(ss.subgradient == tg.gradient);
  CHECK(ss.value() == tg.value);
  CHECK(ss.argmax == std::vector<int>{0});
  CHECK(ss.weights == std::vector<double>{1.0});
}

TEST_CASE("argmax dominance and tie-break") {
  const MaxOfSmooth m = two_parabolas();
  const SubgradientSample a = m.sample(scalar(1), Seed{});
  CHECK(a.argmax == std::vector<int>{1});
  CHECK(a.subgradient[0] == 4.0);
  CHECK(a.weights == std::vector<double>{0.0, 1.0});

  const SubgradientSample t = m.sample(scalar(0), Seed{});
  CHECK(t.argmax == std::vector<int>{0, 1});
  CHECK(t.weights == std::vector<double>{1.0, 0.0});
  CHECK(t.subgradient[0] == 0.0);
}

TEST_CASE("argmax tolerance is relative") {
  CHECK(argmax_set({1e6, 1e6 * (1 - 1e-13)}) == std::vector<int>{0, 1});
  CHECK(argmax_set({1e6, 1e6 * (1 - 1e-11)}) == std::vector<int>{0});
  CHECK(argmax_set({3.0, 5.0, 5.0}) == std::vector<int>{1, 2});
}

TEST_CASE("weak convexity constant arithmetic") {
  ProblemMetadata m;
  m.L = 1;
  m.G = 1;
  m.B = 1;
  const SmoothnessCertificate c{2.0, 3.0, Regime::General};
  const WeakConvexityConstants one = weak_convexity_constants(1, m, {c});
  CHECK(one.L_hat_sgd == 12.0);
  CHECK(one.G_hat == 3.0);
  const WeakConvexityConstants two = weak_convexity_constants(2, m, {c, SmoothnessCertificate{1.0, 1.0}});
  CHECK(two.L_hat_prox == 18.0);
  CHECK(two.L_hat_sgd == 12.0);
  const WeakConvexityConstants id = weak_convexity_constants(1, m, {SmoothnessCertificate{}});
  CHECK(id.L_hat_sgd == m.L);
  CHECK(id.G_hat == m.G);
  CHECK_THROWS_AS(weak_convexity_constants(1, m, {}), std::invalid_argument);
}

TEST_CASE("weak convexity inequality on a deterministic toolkit") {
  const DiracGan g = make_dirac_gan();
  const AlgorithmSpec a = sga(0.05, 5, Initializer::uniform(-0.1, 0.1));
  AlgorithmSpec b = sga(0.02, 10, Initializer::uniform(-0.5, 0.5));
  const Toolkit tk = Toolkit::of({a, b});
  const WeakConvexityConstants k = weak_convexity_constants(tk, g.metadata());
  const ToolkitObjective obj(g, tk, Seed{60, 0, 0});
  double worst = 0.0;
  for (std::uint64_t c = 0; c < 200; ++c) {
    const Vector p = draw_uniform_in_box(Seed{61, 0, c}, -3, 3, 2, Role::Lab);
    const Vector x = p.head(1), x2 = p.tail(1);
    const SubgradientSample s = obj.sample(x, Seed{});
    const double slack = obj.value(x2) - s.value() - s.subgradient.dot(x2 - x) + 0.5 * k.L_hat_sgd * (x2 - x).squaredNorm();
    worst = std::min(worst, slack);
  }
  CHECK(worst >= -1e-8);
}

TEST_CASE("subgradient norms respect G_hat") {
  const DiracGan g = make_dirac_gan();
  const Toolkit tk = Toolkit::single(sga(0.05, 10, Initializer::uniform(-0.1, 0.1)));
  const WeakConvexityConstants k = weak_convexity_constants(tk, g.metadata());
  for (std::uint64_t c = 0; c < 100; ++c) {
    const Vector x = draw_uniform_in_box(Seed{62, 0, c}, -2, 2, 1, Role::Lab);
    CHECK(sample_subgradient(tk, g, x, Seed{63, 0, c}).subgradient.norm() <= k.G_hat * (1 + 1e-6));
  }
}

TEST_CASE("toolkit validation") {
  Toolkit tk = Toolkit::of({sga(0.1, 1), sga(0.1, 2)});
  CHECK_NOTHROW(tk.validate());
  tk.streams = {3, 3};
  CHECK_THROWS_AS(tk.validate(), std::invalid_argument);
  CHECK_THROWS_AS(Toolkit{}.validate(), std::invalid_argument);
  AlgorithmSpec p = sga(0.1, 1);
  p.kind = AlgorithmKind::ProjectedSGA;
  const QuadraticGame q = make_quadratic_game(mat1(1), 1.0);
  CHECK_THROWS_AS(ToolkitObjective(q, Toolkit::single(p)), UnsupportedNonsmooth);
  CHECK_NOTHROW(ToolkitObjective(q, Toolkit::single(p), std::nullopt, GradientMode::Partial));
}

TEST_CASE("toolkit algorithms draw independent seeds") {
  const DiracGan g = make_dirac_gan();
  const AlgorithmSpec s = sga(0.1, 3, Initializer::uniform(-1, 1));
  const Toolkit tk = Toolkit::of({s, s});
  const SubgradientSample ss = sample_subgradient(tk, g, scalar(1), Seed{1, 0, 0});
  CHECK(ss.values[0] != ss.values[1]);
}

TEST_CASE("frozen toolkit objective is deterministic") {
  const DiracGan g = make_dirac_gan();
  const ToolkitObjective frozen(g, Toolkit::single(sga(0.1, 3, Initializer::uniform(-1, 1))), Seed{2, 0, 0});
  CHECK(frozen.deterministic());
  CHECK(frozen.sample(scalar(1), Seed{9, 9, 9}).subgradient == frozen.sample(scalar(1), Seed{}).subgradient);
  const ToolkitObjective live(g, Toolkit::single(sga(0.1, 3, Initializer::uniform(-1, 1))));
  CHECK_FALSE(live.deterministic());
  CHECK(live.sample(scalar(1), Seed{9, 9, 9}).subgradient != live.sample(scalar(1), Seed{}).subgradient);
}
