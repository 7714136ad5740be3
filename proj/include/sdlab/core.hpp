#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sdlab {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AllZeroError : Error {
  AllZeroError() : Error("normalize: all entries are zero") {}
};

struct DimensionMismatchError : Error {
  explicit DimensionMismatchError(const std::string& what) : Error("dimension mismatch: " + what) {}
};

struct TokenOutOfRangeError : Error {
  explicit TokenOutOfRangeError(const std::string& what) : Error("token out of range: " + what) {}
};

// ---------------------------------------------------------------------------
// Tokens and vocabulary
// ---------------------------------------------------------------------------

using TokenId = int;

struct Vocabulary {
  int size = 0;
  TokenId eos = 0;

  Vocabulary() = default;
  Vocabulary(int size_, TokenId eos_) : size(size_), eos(eos_) {
    if (size < 2) throw Error("vocabulary size must be >= 2");
    if (eos < 0 || eos >= size) throw TokenOutOfRangeError("eos outside vocabulary");
  }
};

// ---------------------------------------------------------------------------
// Probability vectors
// ---------------------------------------------------------------------------

// Floor applied to neural-model outputs so no token ever has exactly zero
// probability under a drafter (acceptance ratios need q > 0).
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kSumTolerance = 1e-9;

struct Distribution {
  std::vector<double> probs;

  Distribution() = default;
  explicit Distribution(std::vector<double> p) : probs(std::move(p)) {}

  int size() const { return static_cast<int>(probs.size()); }
  double operator[](int i) const { return probs[static_cast<size_t>(i)]; }

  bool valid(double tol = kSumTolerance) const {
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0) || !std::isfinite(p)) return false;
      sum += p;
    }
    return std::abs(sum - 1.0) <= tol;
  }
};

inline Distribution normalize(const std::vector<double>& raw) {
  double sum = 0.0;
  for (double x : raw) {
    if (x < 0.0 || !std::isfinite(x)) throw Error("normalize: negative or non-finite entry");
    sum += x;
  }
  if (sum <= 0.0) throw AllZeroError();
  std::vector<double> out(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / sum;
  return Distribution(std::move(out));
}

// ---------------------------------------------------------------------------
// Deterministic counter-based RNG
// ---------------------------------------------------------------------------

// splitmix64 finalizer
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t hash_label(std::string_view label) {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

// Counter-based generator: output depends only on (seed, counter), so any
// call sequence replays bit-exactly from the same seed. Single-owner by
// contract; never shared across threads.
class RngState {
 public:
  explicit RngState(uint64_t seed) : seed_(seed) {}

  uint64_t next_u64() { return mix64(seed_ ^ mix64(counter_++)); }

  // uniform in [0, 1)
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

  // Labeled sub-stream. Derived from the seed only, so adding draws to one
  // stream never perturbs a sibling stream.
  RngState fork(std::string_view label) const { return RngState(mix64(seed_ ^ hash_label(label))); }

  uint64_t seed() const { return seed_; }
  uint64_t counter() const { return counter_; }

 private:
  uint64_t seed_;
  uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// Sampling primitives
// ---------------------------------------------------------------------------

inline TokenId sample(const Distribution& d, RngState& rng) {
  const double u = rng.next_uniform();
  double acc = 0.0;
  int last_positive = -1;
  for (int i = 0; i < d.size(); ++i) {
    const double p = d[i];
    if (p <= 0.0) continue;
    last_positive = i;
    acc += p;
    if (u < acc) return i;
  }
  if (last_positive < 0) throw AllZeroError();
  return last_positive;  // u fell into rounding slack past the last mass
}

inline TokenId argmax(const Distribution& d) {
  // ties break to the lowest index
  int best = 0;
  for (int i = 1; i < d.size(); ++i)
    if (d[i] > d[best]) best = i;
  return best;
}

inline Distribution temperature_scale(const Distribution& d, double temperature) {
  if (temperature < 0.0) throw Error("temperature must be >= 0");
  if (temperature == 1.0) return d;
  if (temperature == 0.0) {
    std::vector<double> out(static_cast<size_t>(d.size()), 0.0);
    out[static_cast<size_t>(argmax(d))] = 1.0;
    return Distribution(std::move(out));
  }
  // p^(1/T) in log domain, shifted by the max for stability
  double max_log = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < d.size(); ++i)
    if (d[i] > 0.0) max_log = std::max(max_log, std::log(d[i]));
  std::vector<double> out(static_cast<size_t>(d.size()), 0.0);
  for (int i = 0; i < d.size(); ++i)
    if (d[i] > 0.0) out[static_cast<size_t>(i)] = std::exp((std::log(d[i]) - max_log) / temperature);
  return normalize(out);
}

inline Distribution top_p_filter(const Distribution& d, double p) {
  if (p <= 0.0 || p > 1.0) throw Error("top-p must be in (0, 1]");
  std::vector<int> order(static_cast<size_t>(d.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return d[a] > d[b]; });  // ties keep lowest index first
  std::vector<double> kept(static_cast<size_t>(d.size()), 0.0);
  double cum = 0.0;
  for (int idx : order) {
    kept[static_cast<size_t>(idx)] = d[idx];
    cum += d[idx];
    if (cum >= p - 1e-12) break;
  }
  return normalize(kept);
}

}  // namespace sdlab
