#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace hjorlicz {

// Counter-based seeding: every Monte Carlo row r draws from a private stream
// whose state is mix(seed, stream_id, r). Rows never share state, so any
// partition of rows over workers yields the same numbers.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  std::uint64_t s = seed ^ (0xD1B54A32D192ED03ULL * (stream + 1));
  std::uint64_t a = splitmix64(s);
  s = a ^ (0x8CB92BA72F3D8DD7ULL * (counter + 1));
  return splitmix64(s);
}

// Small per-row generator (splitmix64 stream).
class RowRng {
 public:
  RowRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t row)
      : state_(mix_seed(seed, stream, row)) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // +1 or -1
  int sign() { return (next_u64() >> 63) ? 1 : -1; }

 private:
  std::uint64_t state_;
};

// Runs body(begin, end) over [0, n) split into contiguous chunks. The body must
// write only to row-indexed outputs so results do not depend on `threads`.
template <class Body>
void parallel_rows(std::size_t n, unsigned threads, Body&& body) {
  threads = std::max(1u, threads);
  if (threads == 1 || n < 2 * threads) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  pool.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t b = std::min(n, t * chunk);
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&body, &errors, t, b, e] {
      try {
        body(b, e);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace hjorlicz
