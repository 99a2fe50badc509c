#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <hjorlicz/finite_dist.hpp>

namespace hjtest {

// Property-test generator; deliberately not the library's counter RNG.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }

  std::vector<double> probs(std::size_t n) {
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& x : w) s += (x = uniform(0.05, 1.0));
    for (auto& x : w) x /= s;
    return w;
  }

  // Scalar law with values on a 1/4 grid in [-lim, lim]
  hjorlicz::FiniteDist scalar_law(int atoms, double lim = 3.0) {
    std::vector<double> v(static_cast<std::size_t>(atoms));
    for (auto& x : v) x = std::round(uniform(-lim, lim) * 4.0) / 4.0;
    return hjorlicz::FiniteDist::scalar(v, probs(v.size()), 1e-9);
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace hjtest
