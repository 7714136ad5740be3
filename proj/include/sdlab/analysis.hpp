#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdlab/core.hpp"
#include "sdlab/model.hpp"
#include "sdlab/specdec.hpp"

namespace sdlab {

struct EmptyTracesError : Error {
  EmptyTracesError() : Error("no iterations in traces") {}
};

struct ExplosionGuardError : Error {
  ExplosionGuardError() : Error("enumeration bound V^max_len exceeded") {}
};

// ---------------------------------------------------------------------------
// Total variation distance
// ---------------------------------------------------------------------------

inline double tvd(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size()) throw DimensionMismatchError("tvd p vs q");
  double acc = 0.0;
  for (int i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return 0.5 * acc;
}

struct Probe {
  std::vector<TokenId> prefix;
  std::optional<ContextFeatures> ctx;
};

struct TvdReport {
  std::vector<double> values;
  std::vector<double> bin_edges;  // 21 edges for 20 uniform bins on [0,1]
  std::vector<int> counts;
  double mean = 0.0;
  double median = 0.0;

  double mass_below(double threshold) const {
    if (values.empty()) return 0.0;
    int n = 0;
    for (double v : values)
      if (v < threshold) ++n;
    return static_cast<double>(n) / static_cast<double>(values.size());
  }
};

inline TvdReport tvd_probe(const LanguageModelInterface& target,
                           const LanguageModelInterface& drafter,
                           const std::vector<Probe>& probes) {
  if (probes.empty()) throw Error("empty probe set");
  TvdReport report;
  for (const Probe& pr : probes)
    report.values.push_back(tvd(target.next_distribution(pr.prefix, pr.ctx),
                                drafter.next_distribution(pr.prefix, pr.ctx)));
  constexpr int kBins = 20;
  report.counts.assign(kBins, 0);
  for (int b = 0; b <= kBins; ++b) report.bin_edges.push_back(static_cast<double>(b) / kBins);
  double sum = 0.0;
  for (double v : report.values) {
    sum += v;
    int bin = std::min(static_cast<int>(v * kBins), kBins - 1);
    ++report.counts[static_cast<size_t>(bin)];
  }
  report.mean = sum / static_cast<double>(report.values.size());
  std::vector<double> sorted = report.values;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  report.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return report;
}

// ---------------------------------------------------------------------------
// Mean accepted length and the analytical speedup proxy
// ---------------------------------------------------------------------------

inline double mean_accepted_length(const std::vector<SpeculationTrace>& traces) {
  long emitted = 0, passes = 0;
  for (const SpeculationTrace& t : traces) {
    emitted += t.total_emitted();
    passes += t.total_forward_passes();
  }
  if (passes == 0) throw EmptyTracesError();
  return static_cast<double>(emitted) / static_cast<double>(passes);
}

// Expected target-equivalent tokens per unit cost of (gamma drafter calls at
// relative cost c) + (one target call).
inline double speedup_model(double tau, int gamma, double cost_ratio) {
  if (tau < 1.0) throw Error("tau must be >= 1");
  if (gamma < 1) throw Error("gamma must be >= 1");
  if (cost_ratio < 0.0) throw Error("cost ratio must be >= 0");
  return tau / (gamma * cost_ratio + 1.0);
}

// ---------------------------------------------------------------------------
// Chi-square goodness of fit
// ---------------------------------------------------------------------------

namespace detail {

// Regularized upper incomplete gamma Q(a, x), series + continued fraction.
inline double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw Error("gamma_q domain");
  if (x == 0.0) return 1.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    // P(a,x) by series
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
  }
  // Q(a,x) by continued fraction
  const double kTiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / kTiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - gln) * h;
}

}  // namespace detail

inline double chi_square_p_value(double statistic, int dof) {
  if (dof < 1) throw Error("chi-square dof must be >= 1");
  return detail::gamma_q(0.5 * dof, 0.5 * statistic);
}

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  bool passed(double alpha) const { return p_value >= alpha; }
};

// Goodness of fit with rare-cell merging: cells whose expected count falls
// below `min_expected` are pooled into one "other" cell.
inline ChiSquareResult chi_square_gof(const std::vector<long>& observed,
                                      const std::vector<double>& expected_probs, long n_total,
                                      double min_expected = 5.0) {
  if (observed.size() != expected_probs.size()) throw DimensionMismatchError("chi-square cells");
  double stat = 0.0;
  int cells = 0;
  double other_obs = 0.0, other_exp = 0.0;
  for (size_t i = 0; i < observed.size(); ++i) {
    const double exp_i = expected_probs[i] * static_cast<double>(n_total);
    if (exp_i < min_expected) {
      other_obs += static_cast<double>(observed[i]);
      other_exp += exp_i;
    } else {
      const double d = static_cast<double>(observed[i]) - exp_i;
      stat += d * d / exp_i;
      ++cells;
    }
  }
  if (other_exp > 0.0) {
    const double d = other_obs - other_exp;
    stat += d * d / other_exp;
    ++cells;
  }
  ChiSquareResult r;
  r.statistic = stat;
  r.dof = std::max(cells - 1, 1);
  r.p_value = chi_square_p_value(stat, r.dof);
  return r;
}

// ---------------------------------------------------------------------------
// Exact sequence enumeration
// ---------------------------------------------------------------------------

using SequenceDistribution = std::map<std::vector<TokenId>, double>;

// Exact autoregressive probability of every EOS-terminated or max-length
// generation continuing from `prompt`. Sequences exclude the prompt.
inline SequenceDistribution enumerate_sequence_distribution(
    const LanguageModelInterface& model, const std::vector<TokenId>& prompt,
    const std::optional<ContextFeatures>& ctx, int max_len, double temperature = 1.0) {
  const int v = model.vocabulary().size;
  double bound = 1.0;
  for (int i = 0; i < max_len; ++i) {
    bound *= v;
    if (bound > 1e6) throw ExplosionGuardError();
  }
  SequenceDistribution dist;
  std::vector<TokenId> prefix = prompt;
  std::vector<TokenId> generated;
  const TokenId eos = model.vocabulary().eos;

  auto recurse = [&](auto&& self, double mass) -> void {
    if (mass <= 0.0) return;
    if (!generated.empty() &&
        (generated.back() == eos || static_cast<int>(generated.size()) == max_len)) {
      dist[generated] += mass;
      return;
    }
    Distribution d = temperature_scale(model.next_distribution(prefix, ctx), temperature);
    for (TokenId t = 0; t < v; ++t) {
      if (d[t] <= 0.0) continue;
      prefix.push_back(t);
      generated.push_back(t);
      self(self, mass * d[t]);
      prefix.pop_back();
      generated.pop_back();
    }
  };
  recurse(recurse, 1.0);
  return dist;
}

// ---------------------------------------------------------------------------
// Losslessness oracles
// ---------------------------------------------------------------------------

// Exact algebraic identity for one verification step:
//   q(x) min(1, p(x)/q(x)) + P_reject * residual(x) = p(x)   for all x.
// Returns the max absolute residual error over tokens.
inline double single_step_identity_error(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size()) throw DimensionMismatchError("identity p vs q");
  double p_reject = 0.0;
  for (int i = 0; i < p.size(); ++i)
    p_reject += q[i] * (1.0 - std::min(1.0, q[i] > 0.0 ? p[i] / q[i] : 1.0));
  std::vector<double> raw(static_cast<size_t>(p.size()), 0.0);
  double raw_sum = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    raw[static_cast<size_t>(i)] = std::max(p[i] - q[i], 0.0);
    raw_sum += raw[static_cast<size_t>(i)];
  }
  double max_err = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    const double res = raw_sum > 0.0 ? raw[static_cast<size_t>(i)] / raw_sum : 0.0;
    const double accept_mass = q[i] > 0.0 ? q[i] * std::min(1.0, p[i] / q[i]) : 0.0;
    max_err = std::max(max_err, std::abs(accept_mass + p_reject * res - p[i]));
  }
  return max_err;
}

struct LosslessVerdict {
  bool passed = false;
  ChiSquareResult chi_square;
  double max_identity_error = 0.0;
  long trials = 0;
  int distinct_sequences = 0;
};

// Empirical check that speculative decode reproduces the target's exact
// sequence distribution, plus the single-step identity over every reachable
// prefix. The enumeration oracle is independent of the decode path.
inline LosslessVerdict lossless_check(const LanguageModelInterface& target,
                                      const LanguageModelInterface& drafter,
                                      const std::vector<TokenId>& prompt,
                                      const std::optional<ContextFeatures>& ctx, int max_len,
                                      long trials, RngState& rng, double alpha = 0.001,
                                      int gamma = 3) {
  SequenceDistribution exact = enumerate_sequence_distribution(target, prompt, ctx, max_len);

  LosslessVerdict verdict;
  verdict.trials = trials;
  verdict.distinct_sequences = static_cast<int>(exact.size());

  // Single-step identity over all prefixes of positive-probability
  // sequences, the prompt itself included.
  std::map<std::vector<TokenId>, bool> seen;
  for (const auto& [seq, mass] : exact) {
    for (size_t cut = 0; cut < seq.size(); ++cut) {
      std::vector<TokenId> prefix = prompt;
      prefix.insert(prefix.end(), seq.begin(), seq.begin() + static_cast<ptrdiff_t>(cut));
      if (!seen.emplace(prefix, true).second) continue;
      verdict.max_identity_error =
          std::max(verdict.max_identity_error,
                   single_step_identity_error(target.next_distribution(prefix, ctx),
                                              drafter.next_distribution(prefix, ctx)));
    }
  }

  SpecConfig cfg;
  cfg.gamma = gamma;
  cfg.temperature = 1.0;
  cfg.max_tokens = max_len;
  std::map<std::vector<TokenId>, long> counts;
  for (long t = 0; t < trials; ++t) {
    RngState run_rng = rng.fork("lossless.trial." + std::to_string(t));
    DecodeResult r = decode(target, drafter, prompt, ctx, cfg, run_rng);
    ++counts[r.tokens];
  }

  std::vector<long> observed;
  std::vector<double> expected;
  for (const auto& [seq, mass] : exact) {
    auto it = counts.find(seq);
    observed.push_back(it != counts.end() ? it->second : 0);
    expected.push_back(mass);
    if (it != counts.end()) counts.erase(it);
  }
  if (!counts.empty()) throw Error("decode produced a sequence outside the oracle support");

  verdict.chi_square = chi_square_gof(observed, expected, trials);
  verdict.passed = verdict.chi_square.passed(alpha) && verdict.max_identity_error < 1e-12;
  return verdict;
}

}  // namespace sdlab
