#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sdlab/analysis.hpp"
#include "sdlab/core.hpp"
#include "sdlab/model.hpp"
#include "sdlab/neural.hpp"
#include "sdlab/specdec.hpp"

namespace sdlab {

struct CtxIndependentTargetError : Error {
  CtxIndependentTargetError()
      : Error("no context-dependent target found after 100 initializations") {}
};

// ---------------------------------------------------------------------------
// Synthetic task
// ---------------------------------------------------------------------------

struct TaskDims {
  int vocab_size = 32;
  TokenId eos = 0;
  int d_ctx = 8;
  int d_vis = 8;
  int target_d_emb = 32;
  int target_window = 3;
  int instruction_len = 2;
  int max_response_len = 24;
};

// Scans random (ctx, ctx') pairs at random short prefixes for a next-token
// TVD witness above `threshold`.
inline bool has_ctx_dependence_witness(const LanguageModelInterface& model, int d_ctx,
                                       RngState& rng, double threshold = 0.1,
                                       int n_pairs = 50) {
  const int v = model.vocabulary().size;
  for (int i = 0; i < n_pairs; ++i) {
    std::vector<double> a(static_cast<size_t>(d_ctx)), b(static_cast<size_t>(d_ctx));
    for (double& x : a) x = rng.next_uniform(-1.0, 1.0);
    for (double& x : b) x = rng.next_uniform(-1.0, 1.0);
    std::vector<TokenId> prefix;
    const int len = static_cast<int>(rng.next_u64() % 3);
    for (int j = 0; j < len; ++j)
      prefix.push_back(static_cast<TokenId>(rng.next_u64() % static_cast<uint64_t>(v)));
    if (tvd(model.next_distribution(prefix, ContextFeatures(a)),
            model.next_distribution(prefix, ContextFeatures(b))) > threshold)
      return true;
  }
  return false;
}

// The ground-truth conditional process: a randomly initialized composite
// whose next-token distributions genuinely depend on ctx (unless built as a
// ctx-independent control task). Initialization is sharper than the drafter's
// so the target's distributions are peaky rather than near-uniform.
class SyntheticTask {
 public:
  SyntheticTask(uint64_t seed, TaskDims dims, std::shared_ptr<CompositeVlm> target,
                bool ctx_dependent)
      : seed_(seed), dims_(dims), target_(std::move(target)), ctx_dependent_(ctx_dependent) {
    if (!ctx_dependent_) text_view_.emplace(*target_);
  }

  const LanguageModelInterface& target() const {
    if (text_view_) return *text_view_;
    return *target_;
  }
  const std::shared_ptr<CompositeVlm>& target_impl() const { return target_; }
  bool ctx_dependent() const { return ctx_dependent_; }
  const TaskDims& dims() const { return dims_; }
  const Vocabulary& vocabulary() const { return target_->vocabulary(); }
  uint64_t seed() const { return seed_; }

  ContextFeatures sample_ctx(RngState& rng) const {
    std::vector<double> f(static_cast<size_t>(dims_.d_ctx));
    for (double& x : f) x = rng.next_uniform(-1.0, 1.0);
    return ContextFeatures(std::move(f));
  }

  // Short uniform non-EOS prefix standing in for a text instruction.
  std::vector<TokenId> sample_instruction(RngState& rng) const {
    const int v = vocabulary().size;
    std::vector<TokenId> out;
    while (static_cast<int>(out.size()) < dims_.instruction_len) {
      TokenId t = static_cast<TokenId>(rng.next_u64() % static_cast<uint64_t>(v));
      if (t != vocabulary().eos) out.push_back(t);
    }
    return out;
  }

 private:
  uint64_t seed_;
  TaskDims dims_;
  std::shared_ptr<CompositeVlm> target_;
  bool ctx_dependent_;
  std::optional<TextOnlyView> text_view_;
};

inline constexpr double kTargetInitScale = 0.8;
inline constexpr double kTaskEncoderScale = 2.5;
inline constexpr double kCtxWitnessThreshold = 0.4;

inline std::shared_ptr<CompositeVlm> make_random_composite(
    const TaskDims& dims, std::shared_ptr<const VisionEncoder> encoder, int d_emb, int window,
    RngState rng, double scale) {
  Projector projector(dims.d_vis, d_emb, rng.fork("projector"), scale);
  TinyNeuralLm lm(Vocabulary(dims.vocab_size, dims.eos), d_emb, window, rng.fork("lm"), scale);
  return std::make_shared<CompositeVlm>(std::move(encoder), std::move(projector), std::move(lm));
}

inline SyntheticTask build_synthetic_task(uint64_t seed, const TaskDims& dims,
                                          bool ctx_dependent = true) {
  if (dims.vocab_size < 2) throw Error("vocabulary size must be >= 2");
  RngState rng(seed);
  for (int attempt = 0; attempt < 100; ++attempt) {
    RngState init = rng.fork("task.init." + std::to_string(attempt));
    auto encoder = std::make_shared<VisionEncoder>(dims.d_ctx, dims.d_vis, init.fork("encoder"),
                                                   kTaskEncoderScale);
    auto target = make_random_composite(dims, encoder, dims.target_d_emb, dims.target_window,
                                        init.fork("target"), kTargetInitScale);
    if (!ctx_dependent) return SyntheticTask(seed, dims, std::move(target), false);
    RngState probe = init.fork("ctx_check");
    if (has_ctx_dependence_witness(*target, dims.d_ctx, probe, kCtxWitnessThreshold))
      return SyntheticTask(seed, dims, std::move(target), true);
  }
  throw CtxIndependentTargetError();
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct PretrainPair {
  ContextFeatures ctx;
  std::vector<TokenId> caption;  // EOS-terminated
};
using PretrainDataset = std::vector<PretrainPair>;

struct DistilledRecord {
  ContextFeatures ctx;
  std::vector<TokenId> instruction;
  std::vector<TokenId> response;  // EOS-terminated
  double temperature = 1.0;
  double top_p = 1.0;
  uint64_t seed = 0;
};
using DistilledDataset = std::vector<DistilledRecord>;

struct SamplingSetting {
  double temperature;
  double top_p;
};

inline std::vector<TokenId> ensure_eos(std::vector<TokenId> seq, TokenId eos) {
  if (seq.empty() || seq.back() != eos) seq.push_back(eos);
  return seq;
}

inline PretrainDataset generate_pretrain_data(const SyntheticTask& task, int n, RngState& rng) {
  if (n <= 0) throw Error("pretrain dataset size must be > 0");
  PretrainDataset data;
  data.reserve(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    RngState rec = rng.fork("pretrain." + std::to_string(j));
    RngState ctx_rng = rec.fork("ctx");
    RngState gen_rng = rec.fork("caption");
    ContextFeatures ctx = task.sample_ctx(ctx_rng);
    std::vector<TokenId> caption = autoregressive_generate(
        task.target(), {}, ctx, 1.0, 1.0, task.dims().max_response_len, gen_rng);
    data.push_back({std::move(ctx), ensure_eos(std::move(caption), task.vocabulary().eos)});
  }
  return data;
}

inline std::vector<TokenId> regenerate_response(const LanguageModelInterface& model,
                                                const DistilledRecord& rec, TokenId eos,
                                                int max_len) {
  RngState gen = RngState(rec.seed).fork("response");
  return ensure_eos(autoregressive_generate(model, rec.instruction, rec.ctx, rec.temperature,
                                            rec.top_p, max_len, gen),
                    eos);
}

// Instruction/response dataset from an arbitrary label model; used directly
// for the vanilla (fixed-label) ablation arm.
inline DistilledDataset generate_distilled_data_from(const SyntheticTask& task,
                                                     const LanguageModelInterface& label_model,
                                                     int n,
                                                     const std::vector<SamplingSetting>& grid,
                                                     RngState& rng, const std::string& label) {
  if (n <= 0) throw Error("distilled dataset size must be > 0");
  if (grid.empty()) throw Error("sampling grid must be non-empty");
  DistilledDataset data;
  data.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const SamplingSetting& s = grid[static_cast<size_t>(i) % grid.size()];
    DistilledRecord rec;
    rec.temperature = s.temperature;
    rec.top_p = s.top_p;
    rec.seed = rng.fork(label + "." + std::to_string(i)).seed();
    RngState base(rec.seed);
    RngState ctx_rng = base.fork("ctx");
    RngState instr_rng = base.fork("instruction");
    rec.ctx = task.sample_ctx(ctx_rng);
    rec.instruction = task.sample_instruction(instr_rng);
    rec.response = regenerate_response(label_model, rec, task.vocabulary().eos,
                                       task.dims().max_response_len);
    data.push_back(std::move(rec));
  }
  return data;
}

// Self-distilled dataset (the target answers its own instructions), with
// (T, top-p) assigned round-robin from the sampling grid and recorded per
// record so any record can be regenerated bit-exactly.
inline DistilledDataset generate_self_distilled_data(const SyntheticTask& task, int n,
                                                     const std::vector<SamplingSetting>& grid,
                                                     RngState& rng) {
  return generate_distilled_data_from(task, task.target(), n, grid, rng, "sdd");
}

// Perturbed copy of the target: additive noise on the output layer,
// everything else shared. Its generations play the role of fixed reference
// labels that systematically differ from the target's own samples while
// staying on-task.
inline std::shared_ptr<CompositeVlm> make_perturbed_target(const SyntheticTask& task,
                                                           uint64_t seed,
                                                           double noise_scale = 0.3) {
  auto clone = std::make_shared<CompositeVlm>(*task.target_impl());
  RngState rng = RngState(seed).fork("perturb");
  for (Tensor* t : clone->lm().params()) {
    if (t->name == "lm.w2" || t->name == "lm.b2")
      for (double& x : t->v) x += rng.next_uniform(-noise_scale, noise_scale);
  }
  return clone;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class TrainPhase { backbone_pretrain, projector_pretrain, sdvit };

struct TrainConfig {
  int epochs = 5;
  int batch_size = 64;
  double lr = 1e-2;
  uint64_t seed = 0;
  TrainPhase phase = TrainPhase::projector_pretrain;
};

// Minibatch SGD with deterministic per-epoch shuffling. Freeze flags must
// already be set; returns per-epoch mean loss (per example).
inline std::vector<double> train_examples(CompositeVlm& model,
                                          const std::vector<TrainExample>& data,
                                          const TrainConfig& cfg) {
  if (data.empty()) throw Error("empty training set");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw Error("bad train config");
  std::vector<Tensor*> params = model.params();
  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> curve;
  RngState shuffle_rng = RngState(cfg.seed).fork("train.shuffle");
  for (int e = 0; e < cfg.epochs; ++e) {
    // Fisher-Yates with the experiment-seeded stream
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(shuffle_rng.next_u64() % i);
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<TrainExample> batch;
      batch.reserve(end - start);
      for (size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
      auto [loss, grads] = model.nll_loss_and_gradients(batch);
      sgd_step(params, grads, cfg.lr);
      epoch_loss += loss * static_cast<double>(batch.size());
    }
    curve.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return curve;
}

inline void apply_phase_freeze(CompositeVlm& model, TrainPhase phase) {
  switch (phase) {
    case TrainPhase::backbone_pretrain:
      model.set_freeze(/*projector_trainable=*/false, /*backbone_trainable=*/true);
      break;
    case TrainPhase::projector_pretrain:
      model.set_freeze(/*projector_trainable=*/true, /*backbone_trainable=*/false);
      break;
    case TrainPhase::sdvit:
      model.set_freeze(/*projector_trainable=*/true, /*backbone_trainable=*/true);
      break;
  }
}

// Phase 1: align the fresh projector while the SLM backbone stays frozen.
inline std::vector<double> pretrain_projector(CompositeVlm& drafter, const PretrainDataset& data,
                                              TrainConfig cfg) {
  if (cfg.phase != TrainPhase::projector_pretrain) throw Error("wrong phase for pretrain");
  apply_phase_freeze(drafter, cfg.phase);
  std::vector<TrainExample> examples;
  examples.reserve(data.size());
  for (const PretrainPair& p : data) examples.push_back({p.ctx, {}, p.caption});
  return train_examples(drafter, examples, cfg);
}

// Phase 2: fine-tune projector + backbone on the target's own responses;
// only the shared encoder stays frozen.
inline std::vector<double> sdvit_finetune(CompositeVlm& drafter, const DistilledDataset& data,
                                          TrainConfig cfg) {
  if (cfg.phase != TrainPhase::sdvit) throw Error("wrong phase for sdvit");
  apply_phase_freeze(drafter, cfg.phase);
  std::vector<TrainExample> examples;
  examples.reserve(data.size());
  for (const DistilledRecord& r : data) examples.push_back({r.ctx, r.instruction, r.response});
  return train_examples(drafter, examples, cfg);
}

// Ablation arm: identical optimization on fixed reference labels instead of
// the target's sampled outputs.
inline std::vector<double> vanilla_finetune(CompositeVlm& drafter, const DistilledDataset& d_ref,
                                            TrainConfig cfg) {
  cfg.phase = TrainPhase::sdvit;
  return sdvit_finetune(drafter, d_ref, cfg);
}

// Text-only backbone pretraining (phase 0): gives every arm a drafter SLM
// that already speaks the task's language, standing in for the pretrained
// small LM the drafter is built from.
inline std::vector<double> pretrain_backbone_text(CompositeVlm& drafter,
                                                  const PretrainDataset& data, TrainConfig cfg) {
  if (cfg.phase != TrainPhase::backbone_pretrain) throw Error("wrong phase for backbone pretrain");
  apply_phase_freeze(drafter, cfg.phase);
  std::vector<TrainExample> examples;
  examples.reserve(data.size());
  for (const PretrainPair& p : data) examples.push_back({std::nullopt, {}, p.caption});
  return train_examples(drafter, examples, cfg);
}

}  // namespace sdlab
