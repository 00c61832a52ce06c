#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace betawolff {

// Bad numeric or structural input; the CLI maps this to exit code 1.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable/unwritable files, malformed CSV/JSON; exit code 2.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exact for integer exponents. Density buckets compare against A0^(k*n),
// so these thresholds must be reproducible bit for bit.
inline double ipow(double base, int e) {
  if (e < 0) return 1.0 / ipow(base, -e);
  double acc = 1.0, b = base;
  for (int k = e; k > 0; k >>= 1) {
    if (k & 1) acc *= b;
    b *= b;
  }
  return acc;
}

// (r2)^(m/2) for integer m >= 0, with r2 = |x-y|^2. Shared by the plain and
// the suppressed kernel so that a zero suppression profile reproduces the
// plain kernel exactly.
inline double pow_half(double r2, int m) {
  double v = ipow(r2, m / 2);
  if (m & 1) v *= std::sqrt(r2);
  return v;
}

inline double dist2(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double dist(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(dist2(a, b));
}

// 17 significant digits, shortest canonical spelling from printf's %g.
std::string fmt_g17(double v);

// Uniform variates built from raw mt19937 words. std::uniform_real_distribution
// is implementation defined, which would break frozen test values.
struct Rng {
  std::mt19937 gen;
  explicit Rng(std::uint32_t seed) : gen(seed) {}
  double u01() { return gen() * (1.0 / 4294967296.0); }
  double uniform(double a, double b) { return a + (b - a) * u01(); }
  std::uint32_t next() { return gen(); }
};

int thread_cap();
void set_thread_cap(int cap);

// Runs body(chunk_index, begin, end) over fixed-size chunks. Chunk boundaries
// do not depend on the worker count, so reductions done slot-per-chunk and
// merged in chunk order give bit-identical results at any thread cap.
void for_chunks(std::size_t count, std::size_t chunk,
                const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

}  // namespace betawolff
