#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "smoothmax/core.hpp"

namespace smoothmax {

enum class AlgorithmKind { SGA, SNAG, ProjectedSGA };
enum class ScheduleKind { Iid, Epoch };
enum class Regime { General, Concave, StronglyConcave };

std::string to_string(AlgorithmKind k);
std::string to_string(ScheduleKind k);
std::string to_string(Regime r);
AlgorithmKind parse_algorithm_kind(const std::string& s);
ScheduleKind parse_schedule_kind(const std::string& s);
Regime parse_regime(const std::string& s);

/// Maps a seed to y0. Never looks at x.
struct Initializer {
  enum class Kind { Zero, Uniform, Fixed, Normal, OracleDefault };
  Kind kind = Kind::Zero;
  double lo = 0.0;
  double hi = 0.0;
  double scale = 1.0;
  Vector value;

  static Initializer zero() { return {}; }
  static Initializer uniform(double lo, double hi);
  static Initializer fixed(Vector v);
  static Initializer normal(double scale);
  static Initializer oracle_default();

  Vector draw(const Seed& seed, const MinimaxOracle& oracle) const;
};

struct AlgorithmSpec {
  AlgorithmKind kind = AlgorithmKind::SGA;
  double eta = 0.1;
  int T = 10;
  double theta = 1.0;  // SNAG momentum; 1 recovers SGA
  double box_lo = -std::numeric_limits<double>::infinity();  // ProjectedSGA only
  double box_hi = std::numeric_limits<double>::infinity();
  Initializer init;
  /// Ascend on the averaged objective instead of sampled components.
  bool full_batch = false;
  ScheduleKind schedule = ScheduleKind::Iid;

  void validate() const;
  bool smooth() const { return kind != AlgorithmKind::ProjectedSGA; }
};

/// Recorded run of an adversary. `ys` holds y_0..y_T, `tildes` the SNAG
/// extrapolation points, `schedule` the component used at each step (-1 means
/// the averaged objective).
struct Trajectory {
  Vector x;
  Seed seed;
  std::vector<Vector> ys;
  std::vector<Vector> tildes;
  std::vector<int> schedule;

  const Vector& final() const { return ys.back(); }
  int steps() const { return static_cast<int>(ys.size()) - 1; }
  /// Point at which step t evaluated its gradient.
  const Vector& eval_point(int t) const { return tildes.empty() ? ys[t] : tildes[t]; }
};

std::vector<int> draw_schedule(const AlgorithmSpec& spec, const ProblemMetadata& meta, const Seed& seed);

Trajectory run(const AlgorithmSpec& spec, const MinimaxOracle& oracle, const Vector& x, const Seed& seed);

/// DA(x, z) v through the recorded trajectory, a d1-vector.
Vector vjp(const AlgorithmSpec& spec, const MinimaxOracle& oracle, const Trajectory& traj, const Vector& v);

/// Dense DA(x, z) of shape d1 x d2; refuses when d1*d2 exceeds the cap.
Matrix jacobian(const AlgorithmSpec& spec, const MinimaxOracle& oracle, const Vector& x, const Seed& seed,
                long cap = 1L << 20);

struct SmoothnessCertificate {
  double G_prime = 0.0;
  double L_prime = 0.0;
  Regime regime = Regime::General;
};

/// Regimes whose hypotheses the metadata and step size satisfy.
std::vector<Regime> admissible_regimes(const AlgorithmSpec& spec, const ProblemMetadata& meta);

/// Certificate for a requested regime, or the tightest admissible one.
SmoothnessCertificate theoretical_smoothness(const AlgorithmSpec& spec, const ProblemMetadata& meta,
                                             std::optional<Regime> regime = std::nullopt);

}  // namespace smoothmax
