// One PASS/FAIL line per acceptance criterion. Optional arguments pick criteria by number.
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "helpers.hpp"
#include "smoothmax/experiment.hpp"

using namespace smoothmax;
using namespace testing_helpers;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

MaxOfSmooth half_square() {
  return MaxOfSmooth(1, {[](const Vector& x) { return ValueGrad{0.5 * x.squaredNorm(), x}; }});
}

MaxOfSmooth abs_value() {
  return MaxOfSmooth(1, {[](const Vector& x) { return ValueGrad{x[0], scalar(1)}; },
                         [](const Vector& x) { return ValueGrad{-x[0], scalar(-1)}; }});
}

// pieces are at worst 1-weakly convex
MaxOfSmooth three_quadratics() {
  return MaxOfSmooth(2, {[](const Vector& x) { return ValueGrad{0.5 * x.squaredNorm() - x[0], x - Vector::Unit(2, 0)}; },
                         [](const Vector& x) {
                           const Vector c = vec({0.5, -1});
                           return ValueGrad{x[0] * x[0] - 0.5 * x[1] * x[1] + x.dot(c), vec({2 * x[0], -x[1]}) + c};
                         },
                         [](const Vector& x) {
                           return ValueGrad{0.25 * x.squaredNorm() + x[1] - 0.3, 0.5 * x + Vector::Unit(2, 1)};
                         }});
}

// the quadratic-game family of criterion 7
QuadraticGame game_family() {
  Matrix C(2, 2);
  C << 1, 0.5, 0, 1;
  return make_quadratic_game(C, 1.0, 2.0);
}

Toolkit family_toolkit(int k) {
  const std::vector<AlgorithmSpec> all{sga(0.5, 2), sga(0.3, 5), sga(0.2, 3)};
  return Toolkit::of(std::vector<AlgorithmSpec>(all.begin(), all.begin() + k));
}

// ---- 1 --------------------------------------------------------------------------------

Outcome total_gradient_correctness() {
  const auto t0 = Clock::now();
  const DiracGan g = make_dirac_gan();
  const AlgorithmSpec s = sga(0.01, 10, Initializer::uniform(-0.1, 0.1));
  const Seed z{11, 0, 0};
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Vector x = draw_uniform_in_box(Seed{1, 0, i}, -2, 2, 1, Role::Lab);
    const ScalarMap m = [&](const Vector& u, Vector* grad) {
      const TotalGradient t = total_gradient(g, s, u, z);
      if (grad) *grad = t.gradient;
      return t.value;
    };
    worst = std::max(worst, gradient_check(m, x));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && secs <= 5.0, "max relative error " + num(worst) + " at 100 points, " + num(secs) + " s"};
}

// ---- 2 --------------------------------------------------------------------------------

Outcome closed_form_adversaries() {
  const QuadraticGame bil = make_quadratic_game(mat1(1), 0.0);
  const AlgorithmSpec s = sga(0.1, 10);
  double e_map = 0, e_grad = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Vector x = draw_uniform_in_box(Seed{2, 0, i}, -2, 2, 1, Role::Lab);
    const TotalGradient t = total_gradient(bil, s, x, Seed{});
    e_map = std::max(e_map, std::abs(t.trajectory.final()[0] - x[0]));
    e_grad = std::max(e_grad, std::abs(t.gradient[0] - 2 * x[0]));
  }
  const QuadraticGame q = make_quadratic_game(mat1(1), 1.0);
  double e_q = 0;
  for (double x : {-1.5, -0.2, 0.0, 0.7, 2.0}) e_q = std::max(e_q, std::abs(run(sga(0.5, 2), q, scalar(x), Seed{}).final()[0] - 0.75 * x));
  return {e_map <= 1e-10 && e_grad <= 1e-10 && e_q <= 1e-12,
          "|A(x)-x| " + num(e_map) + ", |grad-2x| " + num(e_grad) + ", |y2-0.75x| " + num(e_q)};
}

// ---- 3 --------------------------------------------------------------------------------

Outcome smoothness_compliance() {
  const auto t0 = Clock::now();
  Matrix C(2, 2);
  C << 1, 0.5, -0.3, 0.8;
  Matrix Q(2, 2);
  Q << 0.4, 0.1, 0.1, -0.6;  // one positive eigenvalue: nonconcave in y
  const QuadraticGame general = make_general_quadratic(C, Q, 2.0);
  const QuadraticGame concave = make_quadratic_game(C, 0.0, 2.0);
  const QuadraticGame strong = make_quadratic_game(C, 0.5, 2.0);
  const QuadraticGame bil = make_quadratic_game(mat1(1), 0.0, 2.0);

  struct Case {
    std::string name;
    const QuadraticGame* game;
    Regime regime;
    AlgorithmKind kind;
    double eta_L;  // eta * L
  };
  const std::vector<Case> cases{{"sga/general", &general, Regime::General, AlgorithmKind::SGA, 0.1},
                                {"sga/concave", &concave, Regime::Concave, AlgorithmKind::SGA, 0.5},
                                {"sga/strongly_concave", &strong, Regime::StronglyConcave, AlgorithmKind::SGA, 1.0},
                                {"snag/general", &general, Regime::General, AlgorithmKind::SNAG, 0.05}};
  int runs = 0, bad = 0;
  std::string first_bad;
  for (const auto& c : cases) {
    const ProblemMetadata& m = c.game->metadata();
    for (int T : {1, 2, 5, 10, 25, 50}) {
      AlgorithmSpec s = sga(c.eta_L / m.L, T, Initializer::normal(0.1));
      s.kind = c.kind;
      if (c.kind == AlgorithmKind::SNAG) s.theta = 0.5;
      VerifyOptions o;
      o.n_pairs = 200;
      o.regime = c.regime;
      o.seed = Seed{3, static_cast<std::uint64_t>(T), 0};
      const SmoothnessReport r = verify_bounds(s, *c.game, m, box_sampler(-1, 1, m.d1), o);
      ++runs;
      if (r.violated) {
        ++bad;
        if (first_bad.empty()) first_bad = " first violation " + c.name + " T=" + std::to_string(T);
      }
    }
  }
  // bilinear: the map is x -> eta T x exactly
  double worst = 0;
  for (int T : {1, 2, 5, 10, 25, 50}) {
    const AlgorithmSpec s = sga(0.1, T);
    const double L = bil.metadata().L;
    const double e = estimate_lipschitz(adversary_map(s, bil, Seed{}), box_sampler(-1, 1, 1), 200);
    worst = std::max(worst, std::abs(e - s.eta * L * T));
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && worst <= 1e-8 && secs <= 60.0,
          std::to_string(runs - bad) + "/" + std::to_string(runs) + " runs within certificate" + first_bad +
              ", bilinear |est - eta L T| " + num(worst) + ", " + num(secs) + " s"};
}

// ---- 4 --------------------------------------------------------------------------------

Outcome nonsmoothness_detection() {
  // x in [0, 10], y in [0, 1]; the kink sits where eta x hits the upper face of the box from y0 = 0
  const QuadraticGame bil = make_quadratic_game(mat1(1), 0.0, 20.0);
  AlgorithmSpec p = sga(0.2, 1);
  p.kind = AlgorithmKind::ProjectedSGA;
  p.box_lo = 0;
  p.box_hi = 1;
  // gradient of x -> f(x, A(x)); its Lipschitz quotient is the gradient-Lipschitz estimate
  const VectorMap grad = [&](const Vector& x) {
    const VectorMap value = [&](const Vector& u) { return scalar(bil.value(u, run(p, bil, u, Seed{}).final())); };
    return Vector(fd_jacobian(value, x).row(0).transpose());
  };
  const auto per = lipschitz_by_scale(grad, box_sampler(4.999, 5.001, 1), 100, {1e-3, 1e-4}, Seed{4, 0, 0});
  const double growth = per[1] / per[0];
  return {per[0] >= 100 && growth >= 8,
          "estimate " + num(per[0]) + " at scale 1e-3, " + num(per[1]) + " at 1e-4 (x" + num(growth) + ")"};
}

// ---- 5 --------------------------------------------------------------------------------

Outcome moreau_machinery() {
  MoreauConfig c;
  c.gap_target = 1e-15;
  c.inner_budget = 2000;
  c.polish = 50;
  const double L_hat = 0.5;  // lambda = 1
  double e = 0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const double x = draw_uniform_in_box(Seed{5, 0, i}, -3, 3, 1, Role::Lab)[0];
    const auto q = moreau_estimate(half_square(), scalar(x), c, L_hat);
    e = std::max({e, std::abs(q.x_hat[0] - x / 2), std::abs(q.gradient[0] - x / 2), std::abs(q.envelope_value - x * x / 4)});
    const auto a = moreau_estimate(abs_value(), scalar(x), c, L_hat);
    const double prox = std::copysign(std::max(std::abs(x) - 1, 0.0), x);
    const double env = std::abs(x) > 1 ? std::abs(x) - 0.5 : 0.5 * x * x;
    e = std::max({e, std::abs(a.x_hat[0] - prox), std::abs(a.gradient[0] - std::clamp(x, -1.0, 1.0)),
                  std::abs(a.envelope_value - env)});
  }
  const MaxOfSmooth g = three_quadratics();
  MoreauConfig d;
  d.gap_target = 1e-12;
  d.inner_budget = 2000;
  int ok = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Vector x = draw_uniform_in_box(Seed{5, 1, i}, -2, 2, 2, Role::Lab);
    const auto m = moreau_estimate(g, x, d, 1.0);
    ok += g.value(m.x_hat) <= m.envelope_value && m.envelope_value <= g.value(x) + 1e-8;
  }
  return {e <= 1e-6 && ok == 100, "closed-form error " + num(e) + ", sandwich " + std::to_string(ok) + "/100"};
}

// ---- 6 --------------------------------------------------------------------------------

// Constants for three_quadratics on the box [-2, 2]^2, which the run never leaves:
// every piece is at worst 1-weakly convex, the largest piece gradient on the box is
// sqrt(4.5^2 + 3^2), and g(x0) = 3.5 while g >= -1.3 on the box.
WeakConvexityConstants criterion6_constants() {
  WeakConvexityConstants k;
  k.L_hat_sgd = k.L_hat_prox = 1.0;
  k.G_hat = std::sqrt(29.25);
  k.B = 3.5 + 1.3;
  return k;
}

SolverReport criterion6_run(const Objective& g, StepCallback cb = {}, long record_every = 0) {
  SolverConfig sc;
  sc.S = 1999;
  sc.record_moreau_every = record_every;
  sc.return_rule = ReturnRule::Last;
  sc.stall_window = 0;
  sc.seed = Seed{6, 0, 0};
  sc.on_step = std::move(cb);
  return sgd_solve(g, vec({1.5, -1.0}), sc, criterion6_constants());
}

Outcome sgd_solver() {
  const double B = 3.0, L = 7.0, G = 2.5;
  const long n = 12345;
  const double want = std::sqrt(2 * B / (L * G * G * static_cast<double>(n)));
  const double got = auto_step_size(B, L, G, n);
  const bool exact = std::abs(got - want) <= 2 * std::numeric_limits<double>::epsilon() * want;

  const MaxOfSmooth obj = three_quadratics();
  const WeakConvexityConstants k = criterion6_constants();
  const SolverReport r = criterion6_run(obj);
  double reach = 0;
  for (const auto& [step, x] : r.iterates) reach = std::max(reach, x.cwiseAbs().maxCoeff());
  const bool eta_ok = r.eta == auto_step_size(k.B, k.L_hat_sgd, k.G_hat, 2000);

  MoreauConfig mc;
  mc.gap_target = 1e-14;
  mc.inner_budget = 2000;
  mc.polish = 20;
  std::vector<double> env;
  for (const auto& [step, x] : r.iterates) env.push_back(moreau_estimate(obj, x, mc, k.L_hat_sgd).envelope_value);
  const double slack = r.eta * r.eta * k.L_hat_sgd * k.G_hat * k.G_hat;
  int good = 0;
  for (std::size_t s = 1; s < env.size(); ++s) good += env[s] <= env[s - 1] + slack;
  const double frac = static_cast<double>(good) / static_cast<double>(env.size() - 1);
  const FospResult f = is_eps_fosp(obj, r.x_bar, 0.1, k.L_hat_sgd);
  return {exact && eta_ok && frac >= 0.95 && f.stationary() && reach <= 2.0,
          std::string("auto step ") + (exact && eta_ok ? "exact" : "MISMATCH") + " (eta " + num(r.eta) + "), envelope non-increasing in " +
              std::to_string(good) + "/" + std::to_string(env.size() - 1) + " steps, final envelope gradient " +
              num(f.gradient_norm) + " (" + to_string(f.status) + ")"};
}

// ---- 7 --------------------------------------------------------------------------------

Outcome proximal_solver() {
  const auto t0 = Clock::now();
  const QuadraticGame q = game_family();
  const Toolkit tk = family_toolkit(2);
  const ToolkitObjective obj(q, tk, Seed{7, 1, 0});
  const WeakConvexityConstants k = weak_convexity_constants(tk, q.metadata());
  const double eps = 0.1;
  const ProximalReport r = proximal_solve(obj, vec({1.5, -1.0}), eps, k);
  const double need = 0.75 * r.eps_hat * (1 - 1e-6);
  int dec = 0;
  for (std::size_t s = 1; s < r.max_values.size(); ++s) dec += r.max_values[s - 1] - r.max_values[s] >= need;
  const long steps = static_cast<long>(r.max_values.size()) - 1;
  const double bound = 200 * k.L_hat_prox * k.B / (eps * eps);
  const FospResult f = is_eps_fosp(obj, r.x_bar, eps, k.L_hat_prox);
  const double secs = seconds_since(t0);
  return {dec == steps && r.outer_iterations <= bound && f.stationary() && secs <= 120.0,
          std::to_string(dec) + "/" + std::to_string(steps) + " steps decrease by 3 eps_hat/4, " +
              std::to_string(r.outer_iterations) + " outer iterations (bound " + num(bound) + "), envelope gradient " +
              num(f.gradient_norm) + ", " + num(secs) + " s"};
}

// ---- 8 --------------------------------------------------------------------------------

AlgorithmSpec dirac_adversary() { return sga(0.01, 10, Initializer::uniform(-0.1, 0.1)); }

// |theta| after each step, index 0 = start
std::vector<double> dirac_sgd_path(GradientMode mode, std::uint64_t seed, long steps, StepCallback extra = {}) {
  const DiracGan g = make_dirac_gan();
  const ToolkitObjective obj(g, Toolkit::single(dirac_adversary()), std::nullopt, mode);
  SolverConfig sc;
  sc.S = steps - 1;
  sc.eta = 0.01;
  sc.record_moreau_every = 0;
  sc.return_rule = ReturnRule::Last;
  sc.stall_window = 0;
  sc.keep_every = steps;
  sc.seed = Seed{seed, 0, 0};
  std::vector<double> path;
  sc.on_step = [&](const StepRecord& r, const Vector& x) {
    path.push_back(std::abs(x[0]));
    if (extra) extra(r, x);
  };
  const SolverReport r = sgd_solve(obj, scalar(1.0), sc, weak_convexity_constants(obj.toolkit(), g.metadata()));
  path.push_back(std::abs(r.x_bar[0]));
  return path;
}

long first_below(const std::vector<double>& path, double level) {
  for (std::size_t s = 0; s < path.size(); ++s)
    if (path[s] <= level) return static_cast<long>(s);
  return -1;
}

Outcome dirac_phenomenology() {
  // (a) total-gradient SGD
  int reached = 0, monotone = 0;
  long worst_increases = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = dirac_sgd_path(GradientMode::Total, seed, 5000);
    const long hit = first_below(p, 1e-2);
    reached += hit >= 0;
    long inc = 0;
    for (std::size_t s = 11; s < p.size(); ++s) inc += p[s] > p[s - 1];
    monotone += inc == 0;
    worst_increases = std::max(worst_increases, inc);
  }
  // (b) GDA baselines; the orbit crosses theta = 0, so settling means 1000 consecutive steps inside the band
  const DiracGan g = make_dirac_gan();
  std::string gda;
  bool gda_ok = true;
  for (GdaMode mode : {GdaMode::Simultaneous, GdaMode::Alternating}) {
    GdaConfig gc;
    gc.mode = mode;
    gc.eta_x = gc.eta_y = 0.01;
    gc.steps = 50000;
    const GdaReport r = gda_baseline(g, scalar(1), scalar(1), gc);
    long run_in = 0, longest = 0;
    double lowest = 1e300;
    for (const Vector& x : r.xs) {
      run_in = std::abs(x[0]) <= 0.05 ? run_in + 1 : 0;
      longest = std::max(longest, run_in);
      lowest = std::min(lowest, std::abs(x[0]));
    }
    gda_ok = gda_ok && longest < 1000 && r.termination == Termination::Budget;
    gda += " " + to_string(mode) + ": longest stay " + std::to_string(longest) + " steps (min |theta| " + num(lowest) + ");";
  }
  // (c) partial gradient is slower
  int slower = 0;
  std::string hits;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const long t = first_below(dirac_sgd_path(GradientMode::Total, seed, 50000), 1e-2);
    const long p = first_below(dirac_sgd_path(GradientMode::Partial, seed, 50000), 1e-2);
    slower += t >= 0 && (p < 0 || p > t);
    hits += (hits.empty() ? "" : ",") + std::to_string(t) + "/" + std::to_string(p);
  }
  const bool a_ok = reached == 5 && monotone == 5;
  return {a_ok && gda_ok && slower == 5,
          "sgd reached 1e-2 within 5000 steps on " + std::to_string(reached) + "/5 seeds, monotone after step 10 on " +
              std::to_string(monotone) + "/5 (up to " + std::to_string(worst_increases) + " increases);" + gda +
              " partial slower on " + std::to_string(slower) + "/5 (total/partial first hits " + hits + ")"};
}

// ---- 9 --------------------------------------------------------------------------------

Outcome mog_gan() {
  const auto t0 = Clock::now();
  int good = 0;
  std::string counts;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    MixtureSpec ms;
    ms.latent_dim = 4;
    ms.batch = 64;
    ms.n_components = 256;
    const MogGan g = make_mog_gan(ms, {4, 32, 2}, {2, 32, 1}, Activation::Tanh, Seed{seed, 0, 0});
    const ToolkitObjective obj(g, Toolkit::single(sga(0.5, 15, Initializer::oracle_default())), std::nullopt,
                               GradientMode::Total, ComponentMode::PerSample);
    SolverConfig sc;
    sc.S = 4999;
    sc.eta = 0.5;
    sc.record_moreau_every = 0;
    sc.return_rule = ReturnRule::Last;
    sc.stall_window = 0;
    sc.keep_every = 5000;
    sc.seed = Seed{seed, 1, 0};
    WeakConvexityConstants unused;
    const SolverReport r = sgd_solve(obj, g.init_generator(Seed{seed, 5, 0}), sc, unused);
    const auto mass = g.mode_mass(g.sample(r.x_bar, 4096, Seed{seed, 9, 0}));
    int covered = 0;
    for (double m : mass) covered += m >= 0.01;
    good += covered >= 6;
    counts += (counts.empty() ? "" : ",") + std::to_string(covered);
  }
  const double secs = seconds_since(t0);
  return {good >= 4 && secs <= 1800,
          "modes covered per seed " + counts + " (" + std::to_string(good) + "/5 seeds with >= 6), " + num(secs) + " s"};
}

// ---- 10 -------------------------------------------------------------------------------

struct AdvRun {
  double clean = 0, robust = 0;
  Vector params;
};

AdvRun adversarial_run(std::uint64_t seed, int T, GradientMode mode) {
  const TwoClassData train = make_two_class_data(512, Seed{seed, 0, 0});
  const TwoClassData test = make_two_class_data(2000, Seed{seed, 2, 0});
  const AdversarialTraining a =
      make_adversarial_training(train, {2, 16, 2}, Activation::Softplus, 32, 64, Seed{seed, 1, 0});
  const ToolkitObjective obj(a, Toolkit::single(adversarial_attack_spec(a, T, 0.2)), std::nullopt, mode,
                             ComponentMode::PerSample);
  SolverConfig sc;
  sc.S = 1999;
  sc.eta = 0.1;
  sc.record_moreau_every = 0;
  sc.return_rule = ReturnRule::Last;
  sc.stall_window = 0;
  sc.keep_every = 2000;
  sc.seed = Seed{seed, 3, 0};
  const SolverReport r = sgd_solve(obj, a.net().init_params(Seed{seed, 5, 0}), sc, WeakConvexityConstants{});
  AdvRun out;
  out.params = r.x_bar;
  const Matrix zero = Matrix::Zero(2, test.size());
  out.clean = AdversarialTraining::accuracy(a.net(), r.x_bar, test.X, test.labels, zero);
  const Matrix delta = AdversarialTraining::attack(a.net(), r.x_bar, test.X, test.labels, 10, 0.2);
  out.robust = AdversarialTraining::accuracy(a.net(), r.x_bar, test.X, test.labels, delta);
  return out;
}

Outcome adversarial_training() {
  double total = 0, standard = 0, partial = 0;
  std::vector<Vector> trained;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const AdvRun t = adversarial_run(seed, 10, GradientMode::Total);
    total += t.robust / 5;
    standard += adversarial_run(seed, 0, GradientMode::Total).robust / 5;
    partial += adversarial_run(seed, 10, GradientMode::Partial).robust / 5;
    trained.push_back(t.params);
  }
  // growth of the total-gradient norm with T at the trained points
  const TwoClassData train = make_two_class_data(512, Seed{0, 0, 0});
  const AdversarialTraining a =
      make_adversarial_training(train, {2, 16, 2}, Activation::Softplus, 32, 64, Seed{0, 1, 0});
  const ComponentOracle one(a, 0);
  std::vector<int> Ts;
  for (int T = 5; T <= 100; T += 5) Ts.push_back(T);
  const GradNormProfile prof = gradient_norm_profile(one, adversarial_attack_spec(a, 5, 0.2), trained, Ts);
  std::vector<double> logn;
  for (std::size_t t = 0; t < Ts.size(); ++t) {
    double m = 0;
    for (const auto& row : prof.norms) m += row[t] / static_cast<double>(prof.norms.size());
    logn.push_back(std::log(m));
  }
  int checked = 0, decreasing = 0;
  double biggest = -1e300;
  for (std::size_t t = 0; t + 2 < Ts.size(); ++t) {
    if (Ts[t] < 20) continue;
    const double d0 = logn[t + 1] - logn[t], d1 = logn[t + 2] - logn[t + 1];
    ++checked;
    decreasing += d1 <= d0;
    biggest = std::max(biggest, d0);
  }
  const double gain_std = 100 * (total - standard), gain_partial = 100 * (total - partial);
  return {gain_std >= 10 && gain_partial >= 2 && decreasing == checked,
          "robust accuracy total " + num(100 * total) + "%, standard " + num(100 * standard) + "%, partial " +
              num(100 * partial) + "% (gains " + num(gain_std) + ", " + num(gain_partial) +
              " points); log-norm increments decreasing at " + std::to_string(decreasing) + "/" +
              std::to_string(checked) + " T beyond 20, largest increment " + num(biggest) + ", norm at T=100 " +
              num(std::exp(logn.back()))};
}

// ---- 11 -------------------------------------------------------------------------------

Outcome bilinear_divergence() {
  const QuadraticGame bil = make_quadratic_game(mat1(1), 0.0, 1e6);
  GdaConfig gc;
  gc.eta_x = gc.eta_y = 0.05;
  gc.steps = 1000;
  const GdaReport r = gda_baseline(bil, scalar(0.6), scalar(-0.8), gc);
  double worst = 0;
  for (std::size_t s = 0; s < r.xs.size(); ++s) {
    const double n = std::hypot(r.xs[s][0], r.ys[s][0]);
    const double want = std::pow(1 + 0.05 * 0.05, 0.5 * static_cast<double>(s));
    worst = std::max(worst, std::abs(n - want) / want);
  }
  return {worst <= 1e-9 && r.xs.size() == 1001, "max relative deviation " + num(worst) + " over 1000 steps"};
}

// ---- 12 -------------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// metrics rows of the criterion-6 run in the runner's CSV layout
std::string criterion6_csv(const fs::path& path) {
  const MaxOfSmooth g = three_quadratics();
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "step,g_sample,subgrad_norm,moreau_grad_norm,wall_ms,x_norm\n";
    criterion6_run(
        g,
        [&](const StepRecord& r, const Vector& x) {
          os << r.step << ',' << fmt(r.g_sample) << ',' << fmt(r.subgrad_norm) << ','
             << (r.moreau_grad_norm ? fmt(*r.moreau_grad_norm) : "") << ",," << fmt(x.norm()) << '\n';
        },
        100);
  }
  return slurp(path);
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "smoothmax_acceptance";
  fs::create_directories(root);
  const std::string a = criterion6_csv(root / "criterion6_0.csv");
  const std::string b = criterion6_csv(root / "criterion6_1.csv");
  int same = !a.empty() && a == b;

  ExperimentConfig eight;
  eight.name = "criterion8";
  eight.seed = 8;
  eight.problem.kind = "dirac_gan";
  eight.problem.x0 = {1.0};
  AlgorithmConfig d;
  d.eta = 0.01;
  d.T = 10;
  d.init = "uniform:-0.1:0.1";
  eight.algorithms.push_back(d);
  eight.solver.S = 4999;
  eight.solver.eta = 0.01;
  eight.solver.record_moreau_every = 0;

  std::ostringstream log;
  for (const ExperimentConfig* c : {&eight}) {
    std::string first;
    bool ok = true;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = root / (c->name + "_" + std::to_string(rep));
      fs::remove_all(dir);
      RunOptions o;
      o.command = "solve";
      o.out_dir = dir.string();
      o.log = &log;
      ok = ok && run_experiment(*c, o) == 0;
      const std::string bytes = slurp(dir / "metrics.csv");
      ok = ok && !bytes.empty();
      if (rep == 0) first = bytes;
      else ok = ok && bytes == first;
    }
    same += ok;
  }
  return {same == 2, std::to_string(same) + "/2 configurations reproduce byte for byte" +
                         (log.str().empty() ? "" : " (" + log.str() + ")")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"total-gradient correctness", total_gradient_correctness},
      {"closed-form adversaries", closed_form_adversaries},
      {"smoothness certificates hold", smoothness_compliance},
      {"projected ascent is not gradient-Lipschitz", nonsmoothness_detection},
      {"Moreau envelope machinery", moreau_machinery},
      {"SGD solver", sgd_solver},
      {"proximal solver", proximal_solver},
      {"Dirac-GAN phenomenology", dirac_phenomenology},
      {"mixture-of-Gaussians GAN mode coverage", mog_gan},
      {"synthetic adversarial training", adversarial_training},
      {"bilinear GDA divergence", bilinear_divergence},
      {"reproducible metrics", reproducibility}};
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!pick.empty() && !pick.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
