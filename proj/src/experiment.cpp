#include "smoothmax/experiment.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace smoothmax {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---- value formatting ------------------------------------------------------------

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s) {
  const std::string t = trim(s);
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw std::invalid_argument("expected a number, got '" + s + "'");
  return v;
}

template <class I>
I to_integer(const std::string& s) {
  const std::string t = trim(s);
  I v{};
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw std::invalid_argument("expected an integer, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::vector<double> to_doubles(const std::string& s) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (const auto& p : split(s, ',')) out.push_back(to_double(p));
  return out;
}

std::vector<int> to_ints(const std::string& s) {
  std::vector<int> out;
  if (trim(s).empty()) return out;
  for (const auto& p : split(s, ',')) out.push_back(to_integer<int>(p));
  return out;
}

Rows to_rows(const std::string& s) {
  Rows out;
  if (trim(s).empty()) return out;
  for (const auto& r : split(s, ';')) out.push_back(to_doubles(r));
  for (const auto& r : out)
    if (r.size() != out.front().size() || r.empty()) throw std::invalid_argument("matrix rows must have equal length");
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string join(const Rows& m) {
  std::string out;
  for (std::size_t i = 0; i < m.size(); ++i) out += (i ? ";" : "") + join(m[i]);
  return out;
}

std::string one_of(const std::string& s, std::initializer_list<const char*> allowed) {
  const std::string t = trim(s);
  std::string names;
  for (const char* a : allowed) {
    if (t == a) return t;
    names += names.empty() ? a : std::string("|") + a;
  }
  throw std::invalid_argument("expected one of " + names + ", got '" + s + "'");
}

// ---- field tables ----------------------------------------------------------------

struct Field {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::optional<std::string>()> get;
};

Field num(const std::string& k, double& v) {
  return {k, [&v](const std::string& s) { v = to_double(s); }, [&v] { return std::optional(fmt(v)); }};
}
Field opt_num(const std::string& k, std::optional<double>& v) {
  return {k, [&v](const std::string& s) { v = to_double(s); },
          [&v]() -> std::optional<std::string> { return v ? std::optional(fmt(*v)) : std::nullopt; }};
}
template <class I>
Field integer(const std::string& k, I& v) {
  return {k, [&v](const std::string& s) { v = to_integer<I>(s); }, [&v] { return std::optional(std::to_string(v)); }};
}
Field opt_long(const std::string& k, std::optional<long>& v) {
  return {k, [&v](const std::string& s) { v = to_integer<long>(s); },
          [&v]() -> std::optional<std::string> { return v ? std::optional(std::to_string(*v)) : std::nullopt; }};
}
Field flag(const std::string& k, bool& v) {
  return {k, [&v](const std::string& s) { v = to_bool(s); },
          [&v] { return std::optional<std::string>(v ? "true" : "false"); }};
}
Field text(const std::string& k, std::string& v, std::function<std::string(const std::string&)> check = {}) {
  return {k, [&v, check](const std::string& s) { v = check ? check(s) : trim(s); }, [&v] { return std::optional(v); }};
}
Field choice(const std::string& k, std::string& v, std::initializer_list<const char*> allowed) {
  std::vector<std::string> names(allowed.begin(), allowed.end());
  return {k,
          [&v, names](const std::string& s) {
            const std::string t = trim(s);
            std::string all;
            for (const auto& n : names) {
              if (t == n) {
                v = t;
                return;
              }
              all += (all.empty() ? "" : "|") + n;
            }
            throw std::invalid_argument("expected one of " + all + ", got '" + s + "'");
          },
          [&v] { return std::optional(v); }};
}
Field doubles(const std::string& k, std::vector<double>& v) {
  return {k, [&v](const std::string& s) { v = to_doubles(s); }, [&v] { return std::optional(join(v)); }};
}
Field ints(const std::string& k, std::vector<int>& v) {
  return {k, [&v](const std::string& s) { v = to_ints(s); }, [&v] { return std::optional(join(v)); }};
}
Field rows(const std::string& k, Rows& v) {
  return {k, [&v](const std::string& s) { v = to_rows(s); }, [&v] { return std::optional(join(v)); }};
}

std::vector<Field> experiment_fields(ExperimentConfig& c) {
  return {text("name", c.name), integer("seed", c.seed),
          text("command", c.command, [](const std::string& s) {
            const std::string t = trim(s);
            if (t.empty()) return t;
            return one_of(t, {"grad-check", "smoothness", "solve", "baseline", "profile-gradnorm"});
          })};
}

std::vector<Field> problem_fields(ProblemConfig& p) {
  return {choice("kind", p.kind, {"dirac_gan", "quadratic", "mog_gan", "adversarial_training"}),
          num("radius", p.radius),
          rows("C", p.C),
          num("alpha", p.alpha),
          rows("Q", p.Q),
          doubles("x0", p.x0),
          doubles("y0", p.y0),
          integer("n_modes", p.n_modes),
          num("sigma2", p.sigma2),
          integer("latent_dim", p.latent_dim),
          integer("batch", p.batch),
          integer("n_components", p.n_components),
          ints("gen_layers", p.gen_layers),
          ints("disc_layers", p.disc_layers),
          choice("activation", p.activation, {"relu", "softplus", "tanh"}),
          integer("data_seed", p.data_seed),
          integer("n_train", p.n_train),
          integer("n_test", p.n_test),
          ints("net_layers", p.net_layers),
          integer("attack_T", p.attack_T),
          num("attack_step", p.attack_step)};
}

std::vector<Field> algorithm_fields(AlgorithmConfig& a) {
  return {choice("kind", a.kind, {"sga", "snag", "projected_sga"}),
          num("eta", a.eta),
          integer("T", a.T),
          num("theta", a.theta),
          num("box_lo", a.box_lo),
          num("box_hi", a.box_hi),
          text("init", a.init,
               [](const std::string& s) {
                 parse_initializer(s);
                 return trim(s);
               }),
          flag("full_batch", a.full_batch),
          choice("schedule", a.schedule, {"iid", "epoch"})};
}

std::vector<Field> solver_fields(SolverSection& s) {
  return {choice("kind", s.kind, {"sgd", "proximal"}),
          integer("S", s.S),
          num("eps", s.eps),
          opt_num("eta", s.eta),
          integer("record_moreau_every", s.record_moreau_every),
          choice("return_rule", s.return_rule, {"uniform", "last", "postprocess"}),
          flag("stop_on_fosp", s.stop_on_fosp),
          integer("stall_window", s.stall_window),
          integer("keep_every", s.keep_every),
          choice("gradient", s.gradient, {"total", "partial"}),
          choice("components", s.components, {"schedule", "per_sample"}),
          flag("frozen", s.frozen),
          choice("inner_method", s.inner_method, {"prox_linear", "extragradient"}),
          integer("inner_budget", s.inner_budget),
          opt_long("max_outer", s.max_outer),
          integer("moreau_budget", s.moreau_budget),
          opt_num("L_hat", s.L_hat),
          opt_num("G_hat", s.G_hat),
          opt_num("B", s.B)};
}

std::vector<Field> baseline_fields(BaselineSection& b) {
  return {choice("mode", b.mode, {"simultaneous", "alternating", "partial_gradient"}), num("eta_x", b.eta_x),
          num("eta_y", b.eta_y), integer("steps", b.steps), integer("algorithm", b.algorithm)};
}

std::vector<Field> smoothness_fields(SmoothnessSection& s) {
  return {integer("n_pairs", s.n_pairs), doubles("scales", s.scales),
          choice("regime", s.regime, {"auto", "general", "concave", "strongly_concave"}),
          num("slack", s.slack),           num("lo", s.lo),
          num("hi", s.hi),                 flag("gradient_lipschitz", s.gradient_lipschitz)};
}

std::vector<Field> profile_fields(ProfileSection& p) {
  return {ints("T_values", p.T_values), integer("n_points", p.n_points), integer("n_seeds", p.n_seeds),
          num("lo", p.lo),              num("hi", p.hi),                 integer("algorithm", p.algorithm)};
}

std::vector<Field> grad_check_fields(GradCheckSection& g) {
  return {integer("n_points", g.n_points), num("lo", g.lo), num("hi", g.hi), num("tol", g.tol)};
}

std::vector<Field> output_fields(OutputSection& o) {
  return {text("dir", o.dir), choice("format", o.format, {"csv", "json"}), flag("timing", o.timing)};
}

std::vector<std::pair<std::string, std::vector<Field>>> fixed_sections(ExperimentConfig& c) {
  return {{"experiment", experiment_fields(c)}, {"problem", problem_fields(c.problem)},
          {"solver", solver_fields(c.solver)},  {"baseline", baseline_fields(c.baseline)},
          {"smoothness", smoothness_fields(c.smoothness)}, {"profile", profile_fields(c.profile)},
          {"grad_check", grad_check_fields(c.grad_check)}, {"output", output_fields(c.output)}};
}

void apply(const std::string& section, std::vector<Field>& fields, const boost::property_tree::ptree& tree) {
  for (const auto& [key, node] : tree) {
    const std::string name = section + "." + key;
    if (!node.empty()) throw ConfigError(name, "nested keys are not allowed");
    auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return f.key == key; });
    if (it == fields.end()) throw ConfigError(name, "unknown key");
    try {
      it->set(node.data());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(name, e.what());
    }
  }
}

void check_config(const ExperimentConfig& c) {
  auto positive = [](const std::string& key, double v) {
    if (!(v > 0)) throw ConfigError(key, "must be positive");
  };
  positive("problem.radius", c.problem.radius);
  if (c.problem.alpha < 0) throw ConfigError("problem.alpha", "must be >= 0");
  positive("problem.sigma2", c.problem.sigma2);
  positive("problem.batch", c.problem.batch);
  positive("problem.n_components", c.problem.n_components);
  for (std::size_t i = 0; i < c.algorithms.size(); ++i) {
    try {
      to_spec(c.algorithms[i]).validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("algorithm." + std::to_string(i), e.what());
    }
  }
  if (c.solver.S < 0) throw ConfigError("solver.S", "must be >= 0");
  positive("solver.eps", c.solver.eps);
  if (c.solver.eta) positive("solver.eta", *c.solver.eta);
  positive("baseline.eta_x", c.baseline.eta_x);
  positive("baseline.eta_y", c.baseline.eta_y);
  if (c.baseline.steps < 0) throw ConfigError("baseline.steps", "must be >= 0");
  positive("smoothness.n_pairs", c.smoothness.n_pairs);
  if (!(c.smoothness.lo < c.smoothness.hi)) throw ConfigError("smoothness.hi", "must exceed lo");
  if (!(c.profile.lo <= c.profile.hi)) throw ConfigError("profile.hi", "must be >= lo");
  positive("grad_check.tol", c.grad_check.tol);
}

}  // namespace

// ---- parse / serialize ---------------------------------------------------------------

ExperimentConfig parse_config(std::istream& is) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("", "line " + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig cfg;
  auto sections = fixed_sections(cfg);
  std::map<int, const boost::property_tree::ptree*> algos;
  for (const auto& [name, node] : tree) {
    if (node.empty() && !node.data().empty()) throw ConfigError(name, "key outside a section");
    if (name.rfind("algorithm.", 0) == 0) {
      int idx = -1;
      try {
        idx = to_integer<int>(name.substr(10));
      } catch (const std::invalid_argument&) {
      }
      if (idx < 0) throw ConfigError(name, "algorithm sections are named algorithm.0, algorithm.1, ...");
      algos[idx] = &node;
      continue;
    }
    auto it = std::find_if(sections.begin(), sections.end(), [&](const auto& s) { return s.first == name; });
    if (it == sections.end()) throw ConfigError(name, "unknown section");
    apply(name, it->second, node);
  }
  int expect = 0;
  for (const auto& [idx, node] : algos) {
    if (idx != expect) throw ConfigError("algorithm." + std::to_string(expect), "missing section");
    cfg.algorithms.emplace_back();
    auto fields = algorithm_fields(cfg.algorithms.back());
    apply("algorithm." + std::to_string(idx), fields, *node);
    ++expect;
  }
  check_config(cfg);
  return cfg;
}

ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("", "cannot open config file '" + path + "'");
  return parse_config(is);
}

std::string serialize_config(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  std::ostringstream os;
  auto write = [&os](const std::string& name, const std::vector<Field>& fields) {
    os << '[' << name << "]\n";
    for (const auto& f : fields)
      if (auto v = f.get()) os << f.key << " = " << *v << '\n';
    os << '\n';
  };
  auto sections = fixed_sections(cfg);
  write(sections[0].first, sections[0].second);
  write(sections[1].first, sections[1].second);
  for (std::size_t i = 0; i < cfg.algorithms.size(); ++i)
    write("algorithm." + std::to_string(i), algorithm_fields(cfg.algorithms[i]));
  for (std::size_t i = 2; i < sections.size(); ++i) write(sections[i].first, sections[i].second);
  return os.str();
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& cfg) {
  // where results land is not part of the experiment
  ExperimentConfig c = cfg;
  c.output.dir.clear();
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(serialize_config(c));
  return os.str();
}

bool same_config(const ExperimentConfig& a, const ExperimentConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

Initializer parse_initializer(const std::string& s) {
  const auto parts = split(trim(s), ':');
  const std::string kind = parts.empty() ? "" : parts[0];
  auto need = [&](std::size_t n) {
    if (parts.size() != n) throw std::invalid_argument("malformed initializer '" + s + "'");
  };
  if (kind == "zero") {
    need(1);
    return Initializer::zero();
  }
  if (kind == "default") {
    need(1);
    return Initializer::oracle_default();
  }
  if (kind == "uniform") {
    need(3);
    return Initializer::uniform(to_double(parts[1]), to_double(parts[2]));
  }
  if (kind == "normal") {
    need(2);
    return Initializer::normal(to_double(parts[1]));
  }
  if (kind == "fixed") {
    need(2);
    const auto v = to_doubles(parts[1]);
    return Initializer::fixed(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  throw std::invalid_argument("initializer must be zero, default, uniform:lo:hi, normal:scale or fixed:v1,v2,...");
}

AlgorithmSpec to_spec(const AlgorithmConfig& a) {
  AlgorithmSpec s;
  s.kind = parse_algorithm_kind(a.kind);
  s.eta = a.eta;
  s.T = a.T;
  s.theta = a.theta;
  s.box_lo = a.box_lo;
  s.box_hi = a.box_hi;
  s.init = parse_initializer(a.init);
  s.full_batch = a.full_batch;
  s.schedule = parse_schedule_kind(a.schedule);
  return s;
}

// ---- problems ------------------------------------------------------------------------------

namespace {

Matrix to_matrix(const Rows& r, const std::string& key) {
  if (r.empty()) throw ConfigError(key, "matrix is empty");
  Matrix M(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r[0].size()));
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < r[i].size(); ++j) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[i][j];
  return M;
}

Vector start_point(const std::vector<double>& v, int dim, const std::string& key, const Vector& fallback) {
  if (v.empty()) return fallback;
  if (static_cast<int>(v.size()) != dim)
    throw ConfigError(key, "expected " + std::to_string(dim) + " entries, got " + std::to_string(v.size()));
  return Eigen::Map<const Vector>(v.data(), dim);
}

}  // namespace

ProblemInstance build_problem(const ExperimentConfig& cfg) {
  const ProblemConfig& p = cfg.problem;
  ProblemInstance inst;
  const double lo = cfg.grad_check.lo, hi = cfg.grad_check.hi;
  if (p.kind == "dirac_gan") {
    auto g = std::make_unique<DiracGan>(p.radius);
    inst.x0 = start_point(p.x0, 1, "problem.x0", Vector::Constant(1, 1.0));
    inst.y0 = start_point(p.y0, 1, "problem.y0", Vector::Constant(1, 1.0));
    inst.x_columns = {"theta"};
    inst.x_values = [](const Vector& x) { return std::vector<double>{x[0]}; };
    inst.y_columns = {"omega"};
    inst.y_values = [](const Vector& y) { return std::vector<double>{y[0]}; };
    inst.sample_point = [lo, hi](const Seed& s) {
      const Vector w = draw_uniform_in_box(s, lo, hi, 2, Role::Lab);
      return std::pair<Vector, Vector>{w.head(1), w.tail(1)};
    };
    inst.evaluate = [](const Vector& x) { return std::vector<std::pair<std::string, double>>{{"theta", x[0]}}; };
    inst.oracle = std::move(g);
  } else if (p.kind == "quadratic") {
    const Matrix C = to_matrix(p.C, "problem.C");
    std::unique_ptr<QuadraticGame> q;
    try {
      q = p.Q.empty() ? std::make_unique<QuadraticGame>(make_quadratic_game(C, p.alpha, p.radius))
                      : std::make_unique<QuadraticGame>(make_general_quadratic(C, to_matrix(p.Q, "problem.Q"), p.radius));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(p.Q.empty() ? "problem.C" : "problem.Q", e.what());
    }
    const int d1 = q->d1(), d2 = q->d2();
    inst.x0 = start_point(p.x0, d1, "problem.x0", Vector::Ones(d1));
    inst.y0 = start_point(p.y0, d2, "problem.y0", Vector::Zero(d2));
    inst.sample_point = [lo, hi, d1, d2](const Seed& s) {
      const Vector w = draw_uniform_in_box(s, lo, hi, d1 + d2, Role::Lab);
      return std::pair<Vector, Vector>{w.head(d1), w.tail(d2)};
    };
    inst.oracle = std::move(q);
  } else if (p.kind == "mog_gan") {
    MixtureSpec ms;
    ms.n_modes = p.n_modes;
    ms.sigma2 = p.sigma2;
    ms.latent_dim = p.latent_dim;
    ms.batch = p.batch;
    ms.n_components = p.n_components;
    if (p.gen_layers.empty() || p.gen_layers.front() != p.latent_dim || p.gen_layers.back() != 2)
      throw ConfigError("problem.gen_layers", "must start at latent_dim and end at 2");
    if (p.disc_layers.empty() || p.disc_layers.front() != 2 || p.disc_layers.back() != 1)
      throw ConfigError("problem.disc_layers", "must start at 2 and end at 1");
    auto g = std::make_unique<MogGan>(make_mog_gan(ms, p.gen_layers, p.disc_layers, parse_activation(p.activation),
                                                   Seed{p.data_seed, 0, 0}));
    const MogGan* raw = g.get();
    inst.x0 = start_point(p.x0, g->d1(), "problem.x0", g->init_generator(Seed{cfg.seed, 5, 0}));
    inst.y0 = start_point(p.y0, g->d2(), "problem.y0", g->default_y0(Seed{cfg.seed, 6, 0}));
    inst.sample_point = [raw](const Seed& s) {
      return std::pair<Vector, Vector>{raw->init_generator(s), raw->default_y0(s.with_stream(s.stream + 1))};
    };
    const std::uint64_t ds = p.data_seed;
    inst.evaluate = [raw, ds](const Vector& x) {
      const Matrix pts = raw->sample(x, 4096, Seed{ds, 9, 0});
      const auto mass = raw->mode_mass(pts);
      double covered = 0;
      for (double m : mass) covered += m >= 0.01 ? 1 : 0;
      return std::vector<std::pair<std::string, double>>{{"modes_covered", covered},
                                                         {"near_mode_fraction", raw->near_mode_fraction(pts)}};
    };
    inst.oracle = std::move(g);
  } else if (p.kind == "adversarial_training") {
    if (p.net_layers.size() < 2 || p.net_layers.front() != 2 || p.net_layers.back() != 2)
      throw ConfigError("problem.net_layers", "must start at 2 and end at 2");
    const TwoClassData train = make_two_class_data(p.n_train, Seed{p.data_seed, 0, 0});
    auto a = std::make_unique<AdversarialTraining>(make_adversarial_training(
        train, p.net_layers, parse_activation(p.activation), p.batch, p.n_components, Seed{p.data_seed, 1, 0}));
    const AdversarialTraining* raw = a.get();
    inst.x0 = start_point(p.x0, a->d1(), "problem.x0", a->net().init_params(Seed{cfg.seed, 5, 0}));
    inst.y0 = start_point(p.y0, a->d2(), "problem.y0", Vector::Zero(a->d2()));
    const int d2 = a->d2();
    inst.sample_point = [raw, d2](const Seed& s) {
      return std::pair<Vector, Vector>{raw->net().init_params(s),
                                       0.1 * draw_standard_normal(s.with_stream(s.stream + 1), d2)};
    };
    auto test = std::make_shared<TwoClassData>(make_two_class_data(p.n_test, Seed{p.data_seed, 2, 0}));
    const int aT = p.attack_T;
    const double astep = p.attack_step;
    inst.evaluate = [raw, test, aT, astep](const Vector& x) {
      const Matrix zero = Matrix::Zero(2, test->size());
      const Matrix delta = AdversarialTraining::attack(raw->net(), x, test->X, test->labels, aT, astep);
      return std::vector<std::pair<std::string, double>>{
          {"clean_accuracy", AdversarialTraining::accuracy(raw->net(), x, test->X, test->labels, zero)},
          {"robust_accuracy", AdversarialTraining::accuracy(raw->net(), x, test->X, test->labels, delta)}};
    };
    inst.oracle = std::move(a);
  } else {
    throw ConfigError("problem.kind", "unknown problem '" + p.kind + "'");
  }
  return inst;
}

Toolkit build_toolkit(const ExperimentConfig& cfg) {
  if (cfg.algorithms.empty()) throw ConfigError("algorithm.0", "at least one algorithm section is required");
  std::vector<AlgorithmSpec> specs;
  for (const auto& a : cfg.algorithms) specs.push_back(to_spec(a));
  return Toolkit::of(std::move(specs));
}

// ---- runners ---------------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Streams rows to metrics.csv or metrics.jsonl, flushing each row.
class MetricsWriter {
 public:
  MetricsWriter(const fs::path& dir, const std::string& stem, const std::string& format,
                std::vector<std::string> columns)
      : json_(format == "json"), columns_(std::move(columns)) {
    const fs::path path = dir / (stem + (json_ ? ".jsonl" : ".csv"));
    os_.open(path, std::ios::binary | std::ios::trunc);
    if (!os_) throw Error("cannot write '" + path.string() + "'");
    if (!json_) {
      for (std::size_t i = 0; i < columns_.size(); ++i) os_ << (i ? "," : "") << columns_[i];
      os_ << '\n';
    }
  }

  // nullopt renders as an empty CSV cell or a JSON null
  void row(const std::vector<std::optional<double>>& values) {
    if (json_) {
      json j = json::object();
      for (std::size_t i = 0; i < columns_.size(); ++i)
        j[columns_[i]] = values[i] ? json(*values[i]) : json(nullptr);
      os_ << j.dump() << '\n';
    } else {
      for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << (values[i] ? fmt(*values[i]) : "");
      os_ << '\n';
    }
    os_.flush();
  }

 private:
  bool json_;
  std::vector<std::string> columns_;
  std::ofstream os_;
};

struct Context {
  ExperimentConfig cfg;
  fs::path dir;
  std::string format;
  std::ostream& log;
  json summary;
};

void write_summary(const Context& c) {
  std::ofstream os(c.dir / "summary.json", std::ios::binary | std::ios::trunc);
  os << c.summary.dump(2) << '\n';
}

WeakConvexityConstants solver_constants(const ExperimentConfig& cfg, const Toolkit& tk, const ProblemMetadata& meta,
                                        bool needed) {
  WeakConvexityConstants k;
  bool have = false;
  if (meta.source != ConstantsSource::Unknown) {
    try {
      k = weak_convexity_constants(tk, meta);
      have = true;
    } catch (const Error&) {
    }
  }
  if (cfg.solver.L_hat) k.L_hat_sgd = k.L_hat_prox = *cfg.solver.L_hat;
  if (cfg.solver.G_hat) k.G_hat = *cfg.solver.G_hat;
  if (cfg.solver.B) k.B = *cfg.solver.B;
  if (needed && !have && !(cfg.solver.L_hat && cfg.solver.G_hat && cfg.solver.B))
    throw ConfigError("solver.L_hat",
                      "problem constants are not available; set solver.L_hat, solver.G_hat and solver.B");
  return k;
}

std::vector<std::string> base_columns() { return {"step", "g_sample", "subgrad_norm", "moreau_grad_norm", "wall_ms"}; }

int finish(Context& c, Termination t) {
  c.summary["termination"] = to_string(t);
  write_summary(c);
  return t == Termination::NumericFailure ? 3 : 0;
}

int cmd_solve(Context& c) {
  const ExperimentConfig& cfg = c.cfg;
  ProblemInstance inst = build_problem(cfg);
  const Toolkit tk = build_toolkit(cfg);
  tk.validate();
  const bool proximal = cfg.solver.kind == "proximal";
  if (proximal && !cfg.solver.frozen) throw ConfigError("solver.frozen", "the proximal solver needs frozen = true");
  const GradientMode gm = cfg.solver.gradient == "total" ? GradientMode::Total : GradientMode::Partial;
  const ComponentMode cm = cfg.solver.components == "schedule" ? ComponentMode::Schedule : ComponentMode::PerSample;
  std::optional<Seed> frozen;
  if (cfg.solver.frozen) frozen = Seed{cfg.seed, 1, 0};
  const ToolkitObjective obj(*inst.oracle, tk, frozen, gm, cm);
  const bool need_constants = proximal || !cfg.solver.eta || cfg.solver.record_moreau_every > 0 ||
                              cfg.solver.return_rule == "postprocess";
  const WeakConvexityConstants k = solver_constants(cfg, tk, inst.oracle->metadata(), need_constants);

  std::vector<std::string> cols = base_columns();
  cols.push_back("x_norm");
  for (const auto& n : inst.x_columns) cols.push_back(n);
  MetricsWriter w(c.dir, "metrics", c.format, cols);
  const bool timing = cfg.output.timing;
  const StepCallback on_step = [&](const StepRecord& r, const Vector& x) {
    std::vector<std::optional<double>> v{static_cast<double>(r.step), r.g_sample, r.subgrad_norm, r.moreau_grad_norm,
                                         timing ? std::optional(r.wall_ms) : std::nullopt, x.norm()};
    if (inst.x_values)
      for (double e : inst.x_values(x)) v.emplace_back(e);
    w.row(v);
  };

  const auto t0 = Clock::now();
  c.summary["L_hat"] = proximal ? k.L_hat_prox : k.L_hat_sgd;
  c.summary["G_hat"] = k.G_hat;
  Vector x_bar;
  Termination term;
  std::optional<double> final_moreau;
  if (proximal) {
    ProximalConfig pc;
    pc.method = parse_inner_method(cfg.solver.inner_method);
    pc.inner_budget = cfg.solver.inner_budget;
    pc.max_outer = cfg.solver.max_outer;
    pc.on_step = on_step;
    const ProximalReport r = proximal_solve(obj, inst.x0, cfg.solver.eps, k, pc);
    x_bar = r.x_bar;
    term = r.termination;
    c.summary["outer_iterations"] = r.outer_iterations;
    c.summary["outer_bound"] = r.outer_bound;
    c.summary["eps_hat"] = r.eps_hat;
    if (!r.message.empty()) c.summary["message"] = r.message;
    MoreauConfig mc;
    mc.inner_budget = cfg.solver.moreau_budget;
    final_moreau = is_eps_fosp(obj, x_bar, cfg.solver.eps, k.L_hat_prox, mc).gradient_norm;
  } else {
    SolverConfig sc;
    sc.S = cfg.solver.S;
    sc.eps = cfg.solver.eps;
    sc.eta = cfg.solver.eta;
    sc.record_moreau_every = cfg.solver.record_moreau_every;
    sc.return_rule = parse_return_rule(cfg.solver.return_rule);
    sc.stop_on_fosp = cfg.solver.stop_on_fosp;
    sc.stall_window = cfg.solver.stall_window;
    sc.keep_every = cfg.solver.keep_every;
    sc.seed = Seed{cfg.seed, 0, 0};
    sc.moreau.inner_budget = cfg.solver.moreau_budget;
    sc.on_step = on_step;
    const SolverReport r = sgd_solve(obj, inst.x0, sc, k);
    x_bar = r.x_bar;
    term = r.termination;
    c.summary["eta"] = r.eta;
    c.summary["x_bar_step"] = r.x_bar_step;
    if (!r.message.empty()) c.summary["message"] = r.message;
    if (r.final_moreau) final_moreau = r.final_moreau->gradient_norm();
  }
  c.summary["wall_ms_total"] = ms_since(t0);
  c.summary["final_moreau_grad_norm"] = final_moreau ? json(*final_moreau) : json(nullptr);
  if (x_bar.size() > 0) {
    c.summary["x_norm"] = x_bar.norm();
    if (x_bar.size() <= 16) c.summary["x"] = std::vector<double>(x_bar.data(), x_bar.data() + x_bar.size());
    if (inst.evaluate)
      for (const auto& [name, v] : inst.evaluate(x_bar)) c.summary["metrics"][name] = v;
  }
  return finish(c, term);
}

int cmd_baseline(Context& c) {
  const ExperimentConfig& cfg = c.cfg;
  ProblemInstance inst = build_problem(cfg);
  GdaConfig gc;
  gc.mode = parse_gda_mode(cfg.baseline.mode);
  gc.eta_x = cfg.baseline.eta_x;
  gc.eta_y = cfg.baseline.eta_y;
  gc.steps = cfg.baseline.steps;
  gc.seed = Seed{cfg.seed, 0, 0};
  if (gc.mode == GdaMode::PartialGradient) {
    const Toolkit tk = build_toolkit(cfg);
    if (cfg.baseline.algorithm < 0 || cfg.baseline.algorithm >= tk.size())
      throw ConfigError("baseline.algorithm", "no such algorithm section");
    gc.adversary = tk.algorithms[static_cast<std::size_t>(cfg.baseline.algorithm)];
  }
  std::vector<std::string> cols = base_columns();
  cols.push_back("x_norm");
  cols.push_back("y_norm");
  for (const auto& n : inst.x_columns) cols.push_back(n);
  for (const auto& n : inst.y_columns) cols.push_back(n);
  MetricsWriter w(c.dir, "metrics", c.format, cols);
  const bool timing = cfg.output.timing;
  gc.on_step = [&](const StepRecord& r, const Vector& x, const Vector& y) {
    std::vector<std::optional<double>> v{static_cast<double>(r.step), r.g_sample, r.subgrad_norm, std::nullopt,
                                         timing ? std::optional(r.wall_ms) : std::nullopt, x.norm(), y.norm()};
    if (inst.x_values)
      for (double e : inst.x_values(x)) v.emplace_back(e);
    if (inst.y_values)
      for (double e : inst.y_values(y)) v.emplace_back(e);
    w.row(v);
  };
  const auto t0 = Clock::now();
  const GdaReport r = gda_baseline(*inst.oracle, inst.x0, inst.y0, gc);
  c.summary["wall_ms_total"] = ms_since(t0);
  c.summary["final_moreau_grad_norm"] = nullptr;
  const Vector& x = r.xs.back();
  c.summary["x_norm"] = x.norm();
  c.summary["y_norm"] = r.ys.back().norm();
  if (x.size() <= 16) c.summary["x"] = std::vector<double>(x.data(), x.data() + x.size());
  if (!r.message.empty()) c.summary["message"] = r.message;
  if (inst.evaluate && r.termination != Termination::NumericFailure)
    for (const auto& [name, v] : inst.evaluate(x)) c.summary["metrics"][name] = v;
  return finish(c, r.termination);
}

int cmd_smoothness(Context& c) {
  const ExperimentConfig& cfg = c.cfg;
  ProblemInstance inst = build_problem(cfg);
  const ProblemMetadata& meta = inst.oracle->metadata();
  if (meta.source == ConstantsSource::Unknown)
    throw ConfigError("problem.kind", "smoothness needs a problem with declared constants");
  const Toolkit tk = build_toolkit(cfg);
  VerifyOptions o;
  o.n_pairs = cfg.smoothness.n_pairs;
  o.scales = cfg.smoothness.scales;
  o.seed = Seed{cfg.seed, 0, 0};
  o.slack = cfg.smoothness.slack;
  if (cfg.smoothness.regime != "auto") o.regime = parse_regime(cfg.smoothness.regime);
  o.check_gradient_lipschitz = cfg.smoothness.gradient_lipschitz;
  MetricsWriter w(c.dir, "smoothness", c.format,
                  {"algorithm", "scale", "lipschitz", "grad_lipschitz", "G_prime", "L_prime", "violated"});
  const DomainSampler sampler = box_sampler(cfg.smoothness.lo, cfg.smoothness.hi, meta.d1);
  const auto t0 = Clock::now();
  bool any = false;
  json reports = json::array();
  for (int i = 0; i < tk.size(); ++i) {
    SmoothnessReport rep;
    try {
      rep = verify_bounds(tk.algorithms[static_cast<std::size_t>(i)], *inst.oracle, meta, sampler, o);
    } catch (const UnsupportedRegime& e) {
      throw ConfigError("smoothness.regime", e.what());
    }
    for (std::size_t s = 0; s < rep.pair_scales.size(); ++s)
      w.row({static_cast<double>(i), rep.pair_scales[s], rep.lipschitz_per_scale[s],
             o.check_gradient_lipschitz ? std::optional(rep.grad_lipschitz_per_scale[s]) : std::nullopt,
             rep.theoretical.G_prime, rep.theoretical.L_prime, rep.violated ? 1.0 : 0.0});
    any = any || rep.violated;
    reports.push_back({{"algorithm", i},
                       {"regime", to_string(rep.theoretical.regime)},
                       {"lipschitz_estimate", rep.lipschitz_estimate},
                       {"grad_lipschitz_estimate", rep.grad_lipschitz_estimate},
                       {"G_prime", rep.theoretical.G_prime},
                       {"L_prime", rep.theoretical.L_prime},
                       {"sample_count", rep.sample_count},
                       {"lipschitz_violated", rep.lipschitz_violated},
                       {"grad_lipschitz_violated", rep.grad_lipschitz_violated},
                       {"violated", rep.violated}});
  }
  c.summary["reports"] = reports;
  c.summary["violated"] = any;
  c.summary["wall_ms_total"] = ms_since(t0);
  c.summary["final_moreau_grad_norm"] = nullptr;
  return finish(c, Termination::Budget);
}

int cmd_profile(Context& c) {
  const ExperimentConfig& cfg = c.cfg;
  ProblemInstance inst = build_problem(cfg);
  const Toolkit tk = build_toolkit(cfg);
  if (cfg.profile.algorithm < 0 || cfg.profile.algorithm >= tk.size())
    throw ConfigError("profile.algorithm", "no such algorithm section");
  const int d1 = inst.oracle->d1();
  std::vector<Vector> pts;
  for (int i = 0; i < cfg.profile.n_points; ++i)
    pts.push_back(inst.oracle->metadata().source == ConstantsSource::Unknown
                      ? Vector(inst.sample_point(Seed{cfg.seed, 0, static_cast<std::uint64_t>(i)}).first)
                      : draw_uniform_in_box(Seed{cfg.seed, 0, static_cast<std::uint64_t>(i)}, cfg.profile.lo,
                                            cfg.profile.hi, d1, Role::Lab));
  std::vector<Seed> seeds;
  for (int k = 0; k < std::max(1, cfg.profile.n_seeds); ++k) seeds.push_back(Seed{cfg.seed, 1, static_cast<std::uint64_t>(k)});
  const MinimaxOracle* oracle = inst.oracle.get();
  std::unique_ptr<ComponentOracle> comp;
  if (inst.oracle->metadata().n_components > 1) {
    comp = std::make_unique<ComponentOracle>(*inst.oracle, 0);
    oracle = comp.get();
  }
  const auto t0 = Clock::now();
  GradNormProfile prof;
  try {
    prof = gradient_norm_profile(*oracle, tk.algorithms[static_cast<std::size_t>(cfg.profile.algorithm)], pts,
                                 cfg.profile.T_values, seeds);
  } catch (const UnsupportedNonsmooth& e) {
    throw ConfigError("profile.algorithm", e.what());
  }
  MetricsWriter w(c.dir, "profile", c.format, {"T", "point", "norm"});
  for (std::size_t t = 0; t < prof.T_values.size(); ++t)
    for (std::size_t i = 0; i < pts.size(); ++i)
      w.row({static_cast<double>(prof.T_values[t]), static_cast<double>(i), prof.norms[i][t]});
  c.summary["wall_ms_total"] = ms_since(t0);
  c.summary["final_moreau_grad_norm"] = nullptr;
  c.summary["T_values"] = prof.T_values;
  return finish(c, Termination::Budget);
}

double joint_error(const MinimaxOracle& f, const Vector& x, const Vector& y, Component j) {
  const Eigen::Index d1 = x.size(), d2 = y.size();
  const ScalarMap m = [&](const Vector& p, Vector* g) {
    const Vector a = p.head(d1), b = p.tail(d2);
    if (!g) return f.value(a, b, j);
    const FullEval e = f.evaluate(a, b, j);
    g->resize(d1 + d2);
    *g << e.gx, e.gy;
    return e.value;
  };
  Vector p(d1 + d2);
  p << x, y;
  return gradient_check(m, p);
}

int cmd_grad_check(Context& c) {
  const ExperimentConfig& cfg = c.cfg;
  ProblemInstance inst = build_problem(cfg);
  const MinimaxOracle& f = *inst.oracle;
  const int n = f.metadata().n_components;
  std::optional<AlgorithmSpec> spec;
  if (!cfg.algorithms.empty()) {
    const Toolkit tk = build_toolkit(cfg);
    if (tk.algorithms[0].smooth()) spec = tk.algorithms[0];
  }
  const double tol =
      cfg.problem.activation == "relu" && (cfg.problem.kind == "mog_gan" || cfg.problem.kind == "adversarial_training")
          ? std::max(cfg.grad_check.tol, 1e-4)
          : cfg.grad_check.tol;
  MetricsWriter w(c.dir, "grad_check", c.format, {"point", "joint_error", "total_error"});
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int i = 0; i < cfg.grad_check.n_points; ++i) {
    const Seed s{cfg.seed, 0, static_cast<std::uint64_t>(i)};
    const auto [x, y] = inst.sample_point(s);
    const Component j = n > 1 ? Component(i % n) : std::nullopt;
    const double je = joint_error(f, x, y, j);
    std::optional<double> te;
    if (spec) {
      const ComponentOracle one(f, j.value_or(0));
      const MinimaxOracle& g = n > 1 ? static_cast<const MinimaxOracle&>(one) : f;
      const Seed z = s.with_stream(1);
      const ScalarMap m = [&](const Vector& u, Vector* gr) {
        const TotalGradient t = total_gradient(g, *spec, u, z);
        if (gr) *gr = t.gradient;
        return t.value;
      };
      te = gradient_check(m, x);
    }
    worst = std::max({worst, je, te.value_or(0.0)});
    w.row({static_cast<double>(i), je, te});
  }
  c.summary["wall_ms_total"] = ms_since(t0);
  c.summary["final_moreau_grad_norm"] = nullptr;
  c.summary["max_error"] = worst;
  c.summary["tolerance"] = tol;
  c.summary["passed"] = worst <= tol;
  c.summary["termination"] = worst <= tol ? "passed" : "failed";
  write_summary(c);
  if (worst > tol) {
    c.log << "grad-check: max relative error " << worst << " exceeds " << tol << '\n';
    return 3;
  }
  return 0;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg_in, const RunOptions& opts) {
  std::ostream& log = opts.log ? *opts.log : std::cerr;
  try {
    ExperimentConfig cfg = cfg_in;
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.out_dir) cfg.output.dir = *opts.out_dir;
    if (opts.format) {
      if (*opts.format != "csv" && *opts.format != "json") throw ConfigError("output.format", "expected csv or json");
      cfg.output.format = *opts.format;
    }
    const std::string command = opts.command.empty() ? cfg.command : opts.command;
    if (command.empty()) throw ConfigError("experiment.command", "no subcommand given");
    Context c{cfg, fs::path(cfg.output.dir), cfg.output.format, log, json::object()};
    fs::create_directories(c.dir);
    {
      std::ofstream os(c.dir / "config.cfg", std::ios::binary | std::ios::trunc);
      os << serialize_config(cfg);
    }
    c.summary["version"] = kVersion;
    c.summary["command"] = command;
    c.summary["name"] = cfg.name;
    c.summary["config_hash"] = config_hash(cfg);
    c.summary["seed"] = cfg.seed;
    if (command == "solve") return cmd_solve(c);
    if (command == "baseline") return cmd_baseline(c);
    if (command == "smoothness") return cmd_smoothness(c);
    if (command == "profile-gradnorm") return cmd_profile(c);
    if (command == "grad-check") return cmd_grad_check(c);
    throw ConfigError("experiment.command", "unknown subcommand '" + command + "'");
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericFailure& e) {
    log << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const SizeLimitExceeded& e) {
    log << "size limit: " << e.what() << '\n';
    return 3;
  } catch (const ToleranceFailure& e) {
    log << "tolerance failure: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    // unsupported regime or non-smooth adversary for the requested pipeline
    log << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    log << "config error: " << e.what() << '\n';
    return 2;
  }
}

int run_builtin_grad_checks(const RunOptions& opts) {
  const std::string base = opts.out_dir.value_or("out");
  int worst = 0;
  for (const char* kind : {"dirac_gan", "quadratic", "mog_gan", "adversarial_training"}) {
    ExperimentConfig cfg;
    cfg.problem.kind = kind;
    AlgorithmConfig a;
    a.eta = 0.05;
    a.T = 5;
    if (cfg.problem.kind == "quadratic") {
      cfg.problem.C = {{1.0, 0.5}, {0.0, 1.0}};
      cfg.problem.radius = 2.0;
    } else if (cfg.problem.kind == "mog_gan") {
      cfg.problem.batch = 16;
      cfg.problem.n_components = 8;
      cfg.problem.latent_dim = 4;
      cfg.problem.gen_layers = {4, 16, 2};
      cfg.problem.disc_layers = {2, 16, 1};
      a.init = "default";
    } else if (cfg.problem.kind == "adversarial_training") {
      cfg.problem.n_train = 64;
      cfg.problem.batch = 16;
      cfg.problem.n_components = 4;
      cfg.problem.net_layers = {2, 8, 2};
      cfg.grad_check.n_points = 20;
    } else {
      a.init = "uniform:-0.1:0.1";
    }
    cfg.algorithms = {a};
    RunOptions o = opts;
    o.command = "grad-check";
    o.out_dir = (fs::path(base) / kind).string();
    const int code = run_experiment(cfg, o);
    (opts.log ? *opts.log : std::cerr) << kind << ": " << (code == 0 ? "ok" : "FAILED") << '\n';
    worst = std::max(worst, code);
  }
  return worst;
}

}  // namespace smoothmax
