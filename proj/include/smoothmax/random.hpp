#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace smoothmax {

// Philox4x64-10 (Salmon et al., SC'11). Output is a pure function of (counter, key).
using PhiloxCounter = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

PhiloxCounter philox4x64(PhiloxCounter counter, PhiloxKey key);

/// Identifies one random sample z. A draw is a pure function of all three fields.
struct Seed {
  std::uint64_t base = 0;
  std::uint64_t stream = 0;
  std::uint64_t counter = 0;

  Seed with_stream(std::uint64_t s) const { return {base, s, counter}; }
  Seed with_counter(std::uint64_t c) const { return {base, stream, c}; }
  Seed next() const { return {base, stream, counter + 1}; }

  friend bool operator==(const Seed&, const Seed&) = default;
};

/// Purpose lanes mixed into the generator key. A seed handed to an adversary
/// uses AdversaryInit for y0 and Minibatch for its component schedule; solvers
/// use SolverSampling for their own choices.
enum class Role : std::uint64_t {
  AdversaryInit = 0,
  Minibatch = 1,
  SolverSampling = 2,
  Data = 3,
  Lab = 4,
};

/// Sequential view over the Philox blocks of one (seed, role) pair.
class CounterRng {
 public:
  explicit CounterRng(const Seed& seed, Role role = Role::AdversaryInit);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();

 private:
  PhiloxKey key_;
  PhiloxCounter ctr_;
  std::array<std::uint64_t, 4> block_{};
  int used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

Eigen::VectorXd draw_uniform_in_box(const Seed& seed, double lo, double hi, int dim,
                                    Role role = Role::AdversaryInit);
Eigen::VectorXd draw_standard_normal(const Seed& seed, int dim, Role role = Role::AdversaryInit);
std::vector<int> draw_permutation(const Seed& seed, int n, Role role = Role::Minibatch);

}  // namespace smoothmax
