#include "smoothmax/random.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace smoothmax {
namespace {

constexpr std::uint64_t kPhiloxM0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kPhiloxM1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kPhiloxW0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kPhiloxW1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

}  // namespace

PhiloxCounter philox4x64(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

// ctr[0] is the position inside the draw sequence; the seed's counter and
// stream occupy the next two words so distinct seeds never share a block.
CounterRng::CounterRng(const Seed& seed, Role role)
    : key_{seed.base, static_cast<std::uint64_t>(role)},
      ctr_{0, seed.counter, seed.stream, 0} {}

std::uint64_t CounterRng::next_u64() {
  if (used_ == 4) {
    block_ = philox4x64(ctr_, key_);
    ++ctr_[0];
    used_ = 0;
  }
  return block_[used_++];
}

double CounterRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t CounterRng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("CounterRng::below: n must be positive");
  // Lemire's multiply-shift with rejection; unbiased.
  std::uint64_t x = next_u64();
  unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<unsigned __int128>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double CounterRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_normal_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

Eigen::VectorXd draw_uniform_in_box(const Seed& seed, double lo, double hi, int dim, Role role) {
  if (dim < 0 || !(lo <= hi)) throw std::invalid_argument("draw_uniform_in_box: bad box");
  CounterRng rng(seed, role);
  Eigen::VectorXd out(dim);
  for (int i = 0; i < dim; ++i) out[i] = rng.uniform(lo, hi);
  return out;
}

Eigen::VectorXd draw_standard_normal(const Seed& seed, int dim, Role role) {
  if (dim < 0) throw std::invalid_argument("draw_standard_normal: negative dimension");
  CounterRng rng(seed, role);
  Eigen::VectorXd out(dim);
  for (int i = 0; i < dim; ++i) out[i] = rng.normal();
  return out;
}

std::vector<int> draw_permutation(const Seed& seed, int n, Role role) {
  if (n < 0) throw std::invalid_argument("draw_permutation: negative size");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  CounterRng rng(seed, role);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  return perm;
}

}  // namespace smoothmax
