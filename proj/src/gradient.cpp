#include "smoothmax/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace smoothmax {

TotalGradient total_gradient(const MinimaxOracle& oracle, const AlgorithmSpec& spec, const Vector& x,
                             const Seed& seed) {
  if (!spec.smooth()) throw UnsupportedNonsmooth("total_gradient: adversary is not smooth");
  TotalGradient out;
  out.trajectory = run(spec, oracle, x, seed);
  const Vector& yT = out.trajectory.final();
  FullEval e = oracle.evaluate(x, yT);
  out.value = e.value;
  out.gradient = std::move(e.gx);
  if (spec.T > 0) out.gradient += vjp(spec, oracle, out.trajectory, e.gy);
  if (!std::isfinite(out.value) || !all_finite(out.gradient))
    throw NumericFailure("total_gradient: non-finite result", x);
  return out;
}

TotalGradient partial_gradient(const MinimaxOracle& oracle, const AlgorithmSpec& spec, const Vector& x,
                               const Seed& seed) {
  TotalGradient out;
  out.trajectory = run(spec, oracle, x, seed);
  FullEval e = oracle.evaluate(x, out.trajectory.final());
  out.value = e.value;
  out.gradient = std::move(e.gx);
  if (!std::isfinite(out.value) || !all_finite(out.gradient))
    throw NumericFailure("partial_gradient: non-finite result", x);
  return out;
}

// ---- toolkit ----------------------------------------------------------------------

Toolkit Toolkit::single(AlgorithmSpec spec) { return of({std::move(spec)}); }

Toolkit Toolkit::of(std::vector<AlgorithmSpec> specs) {
  Toolkit t;
  t.algorithms = std::move(specs);
  for (std::size_t i = 0; i < t.algorithms.size(); ++i) t.streams.push_back(i);
  return t;
}

void Toolkit::validate() const {
  if (algorithms.empty()) throw std::invalid_argument("toolkit: needs at least one algorithm");
  if (streams.size() != algorithms.size())
    throw std::invalid_argument("toolkit: one stream per algorithm required");
  if (std::set<std::uint64_t>(streams.begin(), streams.end()).size() != streams.size())
    throw std::invalid_argument("toolkit: streams must be pairwise distinct");
  for (const auto& a : algorithms) a.validate();
}

bool Toolkit::smooth() const {
  return std::all_of(algorithms.begin(), algorithms.end(), [](const AlgorithmSpec& a) { return a.smooth(); });
}

// ---- subgradients -------------------------------------------------------------------

double SubgradientSample::value() const { return *std::max_element(values.begin(), values.end()); }

std::vector<int> argmax_set(const std::vector<double>& values, double tol) {
  if (values.empty()) throw std::invalid_argument("argmax_set: empty");
  const double top = *std::max_element(values.begin(), values.end());
  const double band = tol * std::max(1.0, std::abs(top));
  std::vector<int> out;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] >= top - band) out.push_back(static_cast<int>(i));
  return out;
}

SubgradientSample combine_pieces(const std::vector<double>& values, const std::vector<Vector>& grads,
                                 const Seed& seed) {
  SubgradientSample s;
  s.values = values;
  s.seed = seed;
  s.argmax = argmax_set(values);
  s.weights.assign(values.size(), 0.0);
  const int pick = s.argmax.front();
  s.weights[static_cast<std::size_t>(pick)] = 1.0;
  s.subgradient = grads[static_cast<std::size_t>(pick)];
  return s;
}

SubgradientSample sample_subgradient(const Toolkit& toolkit, const MinimaxOracle& oracle, const Vector& x,
                                     const Seed& seed) {
  return ToolkitObjective(oracle, toolkit).sample(x, seed);
}

// ---- constants -------------------------------------------------------------------------

WeakConvexityConstants weak_convexity_constants(int k, const ProblemMetadata& meta,
                                                const std::vector<SmoothnessCertificate>& certificates) {
  if (certificates.empty()) throw std::invalid_argument("weak_convexity_constants: no certificates");
  if (k < 1) throw std::invalid_argument("weak_convexity_constants: k must be >= 1");
  WeakConvexityConstants c;
  for (const auto& cert : certificates) {
    c.G_prime = std::max(c.G_prime, cert.G_prime);
    c.L_prime = std::max(c.L_prime, cert.L_prime);
  }
  const double one = 1.0 + c.G_prime;
  c.G_hat = meta.G * one;
  c.L_hat_sgd = meta.L * one * one + meta.G * c.L_prime;
  c.L_hat_prox = c.L_hat_sgd + k * c.G_hat;
  c.B = meta.B;
  return c;
}

WeakConvexityConstants weak_convexity_constants(const Toolkit& toolkit, const ProblemMetadata& meta,
                                                const std::vector<SmoothnessCertificate>& certificates) {
  return weak_convexity_constants(toolkit.size(), meta, certificates);
}

WeakConvexityConstants weak_convexity_constants(const Toolkit& toolkit, const ProblemMetadata& meta) {
  std::vector<SmoothnessCertificate> certs;
  for (const auto& a : toolkit.algorithms) certs.push_back(theoretical_smoothness(a, meta));
  return weak_convexity_constants(toolkit, meta, certs);
}

// ---- objectives ---------------------------------------------------------------------------

double Objective::value(const Vector& x) const {
  const auto ps = pieces(x);
  double best = ps.front().value;
  for (const auto& p : ps) best = std::max(best, p.value);
  return best;
}

MaxOfSmooth::MaxOfSmooth(int dim, std::vector<SmoothFn> fns) : dim_(dim), fns_(std::move(fns)) {
  if (dim < 1 || fns_.empty()) throw std::invalid_argument("MaxOfSmooth: needs dim >= 1 and one piece");
}

std::vector<ValueGrad> MaxOfSmooth::pieces(const Vector& x) const {
  std::vector<ValueGrad> out;
  out.reserve(fns_.size());
  for (const auto& f : fns_) {
    ValueGrad vg = f(x);
    if (!std::isfinite(vg.value) || !all_finite(vg.grad)) throw NumericFailure("MaxOfSmooth: non-finite piece", x);
    out.push_back(std::move(vg));
  }
  return out;
}

SubgradientSample MaxOfSmooth::sample(const Vector& x, const Seed& seed) const {
  const auto ps = pieces(x);
  std::vector<double> vals;
  std::vector<Vector> grads;
  for (const auto& p : ps) {
    vals.push_back(p.value);
    grads.push_back(p.grad);
  }
  return combine_pieces(vals, grads, seed);
}

ToolkitObjective::ToolkitObjective(const MinimaxOracle& oracle, Toolkit toolkit, std::optional<Seed> frozen,
                                   GradientMode gradient, ComponentMode components)
    : oracle_(oracle),
      toolkit_(std::move(toolkit)),
      frozen_(frozen),
      gradient_(gradient),
      components_(components) {
  toolkit_.validate();
  if (gradient_ == GradientMode::Total && !toolkit_.smooth())
    throw UnsupportedNonsmooth("ToolkitObjective: total gradients need smooth algorithms");
}

int ToolkitObjective::component_for(const Seed& seed) const {
  const int n = oracle_.metadata().n_components;
  if (n == 1) return 0;
  CounterRng rng(seed.with_stream(~std::uint64_t{0}), Role::Minibatch);
  return static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
}

std::vector<TotalGradient> ToolkitObjective::evaluate_all(const Vector& x, const Seed& seed) const {
  std::optional<ComponentOracle> view;
  if (components_ == ComponentMode::PerSample && oracle_.metadata().n_components > 1)
    view.emplace(oracle_, component_for(seed));
  const MinimaxOracle& o = view ? static_cast<const MinimaxOracle&>(*view) : oracle_;
  std::vector<TotalGradient> out;
  out.reserve(static_cast<std::size_t>(toolkit_.size()));
  for (int i = 0; i < toolkit_.size(); ++i) {
    const AlgorithmSpec& spec = toolkit_.algorithms[static_cast<std::size_t>(i)];
    const Seed s = toolkit_.seed_for(i, seed);
    try {
      out.push_back(gradient_ == GradientMode::Total ? total_gradient(o, spec, x, s)
                                                     : partial_gradient(o, spec, x, s));
    } catch (const NumericFailure& e) {
      std::ostringstream os;
      os << e.what() << " (algorithm " << i << ")";
      throw NumericFailure(os.str(), e.point(), e.step());
    }
  }
  return out;
}

std::vector<ValueGrad> ToolkitObjective::pieces(const Vector& x) const {
  if (!frozen_) throw std::logic_error("ToolkitObjective::pieces: objective is stochastic");
  std::vector<ValueGrad> out;
  for (auto& tg : evaluate_all(x, *frozen_)) out.push_back({tg.value, std::move(tg.gradient)});
  return out;
}

SubgradientSample ToolkitObjective::sample(const Vector& x, const Seed& seed) const {
  const Seed s = frozen_ ? *frozen_ : seed;
  auto all = evaluate_all(x, s);
  std::vector<double> vals;
  std::vector<Vector> grads;
  for (auto& tg : all) {
    vals.push_back(tg.value);
    grads.push_back(std::move(tg.gradient));
  }
  return combine_pieces(vals, grads, s);
}

}  // namespace smoothmax
