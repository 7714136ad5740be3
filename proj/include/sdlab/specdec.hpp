#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdlab/core.hpp"
#include "sdlab/model.hpp"

namespace sdlab {

struct DraftZeroProbabilityError : Error {
  DraftZeroProbabilityError() : Error("drafted token has zero probability under q") {}
};

enum class DecodeMode { sampled, greedy };

struct SpecConfig {
  int gamma = 5;
  double temperature = 1.0;
  int max_tokens = 64;
  DecodeMode mode = DecodeMode::sampled;

  void validate() const {
    if (gamma < 1) throw Error("gamma must be >= 1");
    if (max_tokens < 1) throw Error("max_tokens must be >= 1");
    if (temperature < 0.0) throw Error("temperature must be >= 0");
    // greedy mode <=> temperature 0
    if ((mode == DecodeMode::greedy) != (temperature == 0.0))
      throw Error("greedy mode requires temperature 0 (and vice versa)");
  }
};

struct IterationRecord {
  std::vector<TokenId> drafted;
  std::vector<bool> accepted;      // one flag per drafted token
  std::vector<TokenId> emitted;    // accepted run + resampled/bonus token
  int target_forward_passes = 1;   // one parallel verification call per iteration
};

struct SpeculationTrace {
  std::vector<IterationRecord> iterations;

  int total_emitted() const {
    int n = 0;
    for (const IterationRecord& it : iterations) n += static_cast<int>(it.emitted.size());
    return n;
  }
  int total_forward_passes() const {
    int n = 0;
    for (const IterationRecord& it : iterations) n += it.target_forward_passes;
    return n;
  }
};

struct DecodeResult {
  std::vector<TokenId> tokens;  // generated tokens, prompt excluded
  SpeculationTrace trace;
  double tau = 0.0;  // emitted tokens per target forward pass
};

inline double acceptance_probability(double p_tok, double q_tok) {
  if (q_tok <= 0.0) throw DraftZeroProbabilityError();
  return std::min(1.0, p_tok / q_tok);
}

inline Distribution residual_distribution(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size()) throw DimensionMismatchError("residual p vs q");
  std::vector<double> r(static_cast<size_t>(p.size()), 0.0);
  for (int i = 0; i < p.size(); ++i) r[static_cast<size_t>(i)] = std::max(p[i] - q[i], 0.0);
  return normalize(r);  // AllZero only when p == q, unreachable by construction
}

// One draft/verify/resample round. `prefix` is the full current sequence
// (prompt + tokens emitted so far); the drafter may receive a different ctx
// view than the target (text-only drafting passes nullopt).
inline IterationRecord run_iteration(const LanguageModelInterface& target,
                                     const LanguageModelInterface& drafter,
                                     std::vector<TokenId>& prefix,
                                     const std::optional<ContextFeatures>& target_ctx,
                                     const std::optional<ContextFeatures>& drafter_ctx,
                                     const SpecConfig& cfg, RngState& rng) {
  const Vocabulary& vocab = target.vocabulary();
  IterationRecord rec;

  // Draft gamma tokens autoregressively, stopping early at EOS.
  std::vector<TokenId> draft_prefix = prefix;
  std::vector<Distribution> q_dists;
  for (int i = 0; i < cfg.gamma; ++i) {
    Distribution q = temperature_scale(drafter.next_distribution(draft_prefix, drafter_ctx),
                                       cfg.temperature);
    TokenId tok = cfg.mode == DecodeMode::greedy ? argmax(q) : sample(q, rng);
    q_dists.push_back(std::move(q));
    rec.drafted.push_back(tok);
    draft_prefix.push_back(tok);
    if (tok == vocab.eos) break;
  }

  // Verify sequentially against the target. All positions count as a single
  // target forward pass: tau is defined by accounting, not wall clock.
  std::vector<TokenId> verify_prefix = prefix;
  bool all_accepted = true;
  for (size_t i = 0; i < rec.drafted.size(); ++i) {
    const TokenId tok = rec.drafted[i];
    Distribution p = temperature_scale(target.next_distribution(verify_prefix, target_ctx),
                                       cfg.temperature);
    bool accept;
    if (cfg.mode == DecodeMode::greedy) {
      accept = tok == argmax(p);
    } else {
      accept = rng.next_uniform() < acceptance_probability(p[tok], q_dists[i][tok]);
    }
    rec.accepted.push_back(accept);
    if (accept) {
      rec.emitted.push_back(tok);
      verify_prefix.push_back(tok);
      if (tok == vocab.eos) {
        all_accepted = false;  // sequence is finished; no bonus token
        break;
      }
    } else {
      TokenId fix = cfg.mode == DecodeMode::greedy
                        ? argmax(p)
                        : sample(residual_distribution(p, q_dists[i]), rng);
      rec.emitted.push_back(fix);
      all_accepted = false;
      break;
    }
  }

  if (all_accepted) {
    // Bonus token from the target at position gamma+1.
    Distribution p = temperature_scale(target.next_distribution(verify_prefix, target_ctx),
                                       cfg.temperature);
    rec.emitted.push_back(cfg.mode == DecodeMode::greedy ? argmax(p) : sample(p, rng));
  }

  prefix.insert(prefix.end(), rec.emitted.begin(), rec.emitted.end());
  return rec;
}

inline DecodeResult decode(const LanguageModelInterface& target,
                           const LanguageModelInterface& drafter,
                           const std::vector<TokenId>& prompt,
                           const std::optional<ContextFeatures>& target_ctx,
                           const std::optional<ContextFeatures>& drafter_ctx,
                           const SpecConfig& cfg, RngState& rng) {
  cfg.validate();
  const TokenId eos = target.vocabulary().eos;
  DecodeResult result;
  std::vector<TokenId> prefix = prompt;
  while (static_cast<int>(result.tokens.size()) < cfg.max_tokens) {
    IterationRecord rec = run_iteration(target, drafter, prefix, target_ctx, drafter_ctx, cfg, rng);

    // Truncate past EOS or the max-token cap; the trace keeps only what the
    // decode actually emitted so that token accounting stays conserved.
    const int room = cfg.max_tokens - static_cast<int>(result.tokens.size());
    bool done = false;
    std::vector<TokenId> kept;
    for (TokenId t : rec.emitted) {
      kept.push_back(t);
      if (t == eos || static_cast<int>(kept.size()) == room) {
        done = true;
        break;
      }
    }
    rec.emitted = kept;
    result.tokens.insert(result.tokens.end(), kept.begin(), kept.end());
    result.trace.iterations.push_back(std::move(rec));
    if (done) break;
  }
  result.tau = static_cast<double>(result.trace.total_emitted()) /
               static_cast<double>(result.trace.total_forward_passes());
  return result;
}

inline DecodeResult decode(const LanguageModelInterface& target,
                           const LanguageModelInterface& drafter,
                           const std::vector<TokenId>& prompt,
                           const std::optional<ContextFeatures>& ctx, const SpecConfig& cfg,
                           RngState& rng) {
  return decode(target, drafter, prompt, ctx, ctx, cfg, rng);
}

// Text-only drafting baseline: the drafter proposes without ctx while the
// target verifies with it.
inline DecodeResult text_only_decode(const LanguageModelInterface& target,
                                     const LanguageModelInterface& drafter,
                                     const std::vector<TokenId>& prompt,
                                     const std::optional<ContextFeatures>& ctx,
                                     const SpecConfig& cfg, RngState& rng) {
  return decode(target, drafter, prompt, ctx, std::nullopt, cfg, rng);
}

// Reference generation: plain autoregressive sampling from one model. Greedy
// when cfg.mode is greedy. Used both by oracles and by dataset generation.
inline std::vector<TokenId> autoregressive_generate(const LanguageModelInterface& model,
                                                    const std::vector<TokenId>& prompt,
                                                    const std::optional<ContextFeatures>& ctx,
                                                    double temperature, double top_p,
                                                    int max_tokens, RngState& rng) {
  const TokenId eos = model.vocabulary().eos;
  std::vector<TokenId> prefix = prompt;
  std::vector<TokenId> out;
  while (static_cast<int>(out.size()) < max_tokens) {
    Distribution d = temperature_scale(model.next_distribution(prefix, ctx), temperature);
    if (top_p < 1.0) d = top_p_filter(d, top_p);
    TokenId tok = temperature == 0.0 ? argmax(d) : sample(d, rng);
    out.push_back(tok);
    prefix.push_back(tok);
    if (tok == eos) break;
  }
  return out;
}

}  // namespace sdlab
