#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdlab/core.hpp"
#include "sdlab/model.hpp"

namespace sdlab {

struct ShapeMismatchError : Error {
  explicit ShapeMismatchError(const std::string& what) : Error("shape mismatch: " + what) {}
};

struct EmptyResponseError : Error {
  EmptyResponseError() : Error("training example has an empty response") {}
};

// ---------------------------------------------------------------------------
// Parameter tensors
// ---------------------------------------------------------------------------

struct Tensor {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<double> v;
  bool frozen = false;

  Tensor() = default;
  Tensor(std::string name_, int rows_, int cols_, bool frozen_ = false)
      : name(std::move(name_)),
        rows(rows_),
        cols(cols_),
        v(static_cast<size_t>(rows_) * static_cast<size_t>(cols_), 0.0),
        frozen(frozen_) {}

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  size_t count() const { return v.size(); }

  void init_uniform(RngState& rng, double scale) {
    for (double& x : v) x = rng.next_uniform(-scale, scale);
  }
};

// Per-tensor gradient accumulator keyed by tensor name.
struct Gradients {
  std::map<std::string, std::vector<double>> by_name;

  std::vector<double>& of(const Tensor& t) {
    auto it = by_name.find(t.name);
    if (it == by_name.end())
      it = by_name.emplace(t.name, std::vector<double>(t.count(), 0.0)).first;
    return it->second;
  }
  const std::vector<double>& of(const Tensor& t) const { return by_name.at(t.name); }

  void scale(double s) {
    for (auto& [_, g] : by_name)
      for (double& x : g) x *= s;
  }
};

// w <- w - lr * g, elementwise; frozen tensors are untouched.
inline void sgd_step(std::span<Tensor*> params, const Gradients& grads, double lr) {
  for (Tensor* t : params) {
    if (t->frozen) continue;
    auto it = grads.by_name.find(t->name);
    if (it == grads.by_name.end()) continue;
    const std::vector<double>& g = it->second;
    if (g.size() != t->count()) throw ShapeMismatchError("gradient for " + t->name);
    for (size_t i = 0; i < g.size(); ++i) t->v[i] -= lr * g[i];
  }
}

// ---------------------------------------------------------------------------
// Frozen vision encoder: a fixed random linear map d_ctx -> d_vis
// ---------------------------------------------------------------------------

class VisionEncoder {
 public:
  VisionEncoder(int d_ctx, int d_vis, RngState rng, double scale = 0.5)
      : w_("encoder.w", d_vis, d_ctx, /*frozen=*/true) {
    w_.init_uniform(rng, scale);
  }

  std::vector<double> encode(const ContextFeatures& ctx) const {
    if (ctx.dim() != w_.cols) throw DimensionMismatchError("encoder input");
    std::vector<double> h(static_cast<size_t>(w_.rows), 0.0);
    for (int r = 0; r < w_.rows; ++r) {
      double acc = 0.0;
      for (int c = 0; c < w_.cols; ++c) acc += w_.at(r, c) * ctx.features[static_cast<size_t>(c)];
      h[static_cast<size_t>(r)] = acc;
    }
    return h;
  }

  int input_dim() const { return w_.cols; }
  int output_dim() const { return w_.rows; }
  const Tensor& weights() const { return w_; }
  Tensor& weights_mutable() { return w_; }  // serialization only

 private:
  Tensor w_;
};

// ---------------------------------------------------------------------------
// Trainable projector: 2-layer MLP d_vis -> d_vis -> d_emb, tanh hidden
// ---------------------------------------------------------------------------

class Projector {
 public:
  Projector(int d_vis, int d_emb, RngState rng, double scale = 0.1)
      : w1_("projector.w1", d_vis, d_vis),
        b1_("projector.b1", d_vis, 1),
        w2_("projector.w2", d_emb, d_vis),
        b2_("projector.b2", d_emb, 1) {
    w1_.init_uniform(rng, scale);
    b1_.init_uniform(rng, scale);
    w2_.init_uniform(rng, scale);
    b2_.init_uniform(rng, scale);
  }

  struct Cache {
    std::vector<double> input;
    std::vector<double> hidden;  // tanh activations
    std::vector<double> output;
  };

  Cache forward(const std::vector<double>& h) const {
    if (static_cast<int>(h.size()) != w1_.cols) throw DimensionMismatchError("projector input");
    Cache c;
    c.input = h;
    c.hidden.assign(static_cast<size_t>(w1_.rows), 0.0);
    for (int r = 0; r < w1_.rows; ++r) {
      double acc = b1_.v[static_cast<size_t>(r)];
      for (int k = 0; k < w1_.cols; ++k) acc += w1_.at(r, k) * h[static_cast<size_t>(k)];
      c.hidden[static_cast<size_t>(r)] = std::tanh(acc);
    }
    c.output.assign(static_cast<size_t>(w2_.rows), 0.0);
    for (int r = 0; r < w2_.rows; ++r) {
      double acc = b2_.v[static_cast<size_t>(r)];
      for (int k = 0; k < w2_.cols; ++k) acc += w2_.at(r, k) * c.hidden[static_cast<size_t>(k)];
      c.output[static_cast<size_t>(r)] = acc;
    }
    return c;
  }

  std::vector<double> project(const std::vector<double>& h) const { return forward(h).output; }

  // Backprop d_out into parameter gradients; the encoder upstream is frozen,
  // so the gradient w.r.t. the input is not propagated further.
  void backward(const Cache& c, const std::vector<double>& d_out, Gradients& grads) const {
    std::vector<double>& gw2 = grads.of(w2_);
    std::vector<double>& gb2 = grads.of(b2_);
    std::vector<double> d_hidden(c.hidden.size(), 0.0);
    for (int r = 0; r < w2_.rows; ++r) {
      const double d = d_out[static_cast<size_t>(r)];
      gb2[static_cast<size_t>(r)] += d;
      for (int k = 0; k < w2_.cols; ++k) {
        gw2[static_cast<size_t>(r) * w2_.cols + k] += d * c.hidden[static_cast<size_t>(k)];
        d_hidden[static_cast<size_t>(k)] += d * w2_.at(r, k);
      }
    }
    std::vector<double>& gw1 = grads.of(w1_);
    std::vector<double>& gb1 = grads.of(b1_);
    for (int r = 0; r < w1_.rows; ++r) {
      const double t = c.hidden[static_cast<size_t>(r)];
      const double d = d_hidden[static_cast<size_t>(r)] * (1.0 - t * t);
      gb1[static_cast<size_t>(r)] += d;
      for (int k = 0; k < w1_.cols; ++k)
        gw1[static_cast<size_t>(r) * w1_.cols + k] += d * c.input[static_cast<size_t>(k)];
    }
  }

  int input_dim() const { return w1_.cols; }
  int output_dim() const { return w2_.rows; }

  std::vector<Tensor*> params() { return {&w1_, &b1_, &w2_, &b2_}; }
  std::vector<const Tensor*> params() const { return {&w1_, &b1_, &w2_, &b2_}; }

 private:
  Tensor w1_, b1_, w2_, b2_;
};

// ---------------------------------------------------------------------------
// Fixed-window embedding-MLP language model backbone
// ---------------------------------------------------------------------------

// Input to the MLP is [context slot | last-k token embeddings]; positions
// before the sequence start use a learned pad embedding, and a missing
// context uses a learned no-image embedding (text-only mode).
class TinyNeuralLm {
 public:
  TinyNeuralLm(Vocabulary vocab, int d_emb, int window, RngState rng, double scale = 0.1,
               int hidden = 0)
      : vocab_(vocab),
        d_emb_(d_emb),
        window_(window),
        hidden_(hidden > 0 ? hidden : 2 * d_emb),
        emb_("lm.emb", vocab.size, d_emb),
        pad_emb_("lm.pad_emb", 1, d_emb),
        no_ctx_emb_("lm.no_ctx_emb", 1, d_emb),
        w1_("lm.w1", hidden_, (window + 1) * d_emb),
        b1_("lm.b1", hidden_, 1),
        w2_("lm.w2", vocab.size, hidden_),
        b2_("lm.b2", vocab.size, 1) {
    if (window < 1) throw Error("window must be >= 1");
    emb_.init_uniform(rng, scale);
    pad_emb_.init_uniform(rng, scale);
    no_ctx_emb_.init_uniform(rng, scale);
    w1_.init_uniform(rng, scale);
    b1_.init_uniform(rng, scale);
    w2_.init_uniform(rng, scale);
    b2_.init_uniform(rng, scale);
  }

  struct Cache {
    std::vector<int> slot_tokens;  // token id per window slot, -1 = pad
    std::vector<double> input;     // [ctx slot | window embeddings]
    std::vector<double> hidden;    // tanh activations
    Distribution probs;            // floored softmax
  };

  Cache forward(std::span<const TokenId> prefix, const std::vector<double>& ctx_slot) const {
    if (static_cast<int>(ctx_slot.size()) != d_emb_)
      throw DimensionMismatchError("context slot embedding");
    Cache c;
    c.input.reserve(static_cast<size_t>((window_ + 1) * d_emb_));
    c.input.insert(c.input.end(), ctx_slot.begin(), ctx_slot.end());
    c.slot_tokens.resize(static_cast<size_t>(window_));
    for (int j = 0; j < window_; ++j) {
      const ptrdiff_t idx = static_cast<ptrdiff_t>(prefix.size()) - window_ + j;
      if (idx < 0) {
        c.slot_tokens[static_cast<size_t>(j)] = -1;
        c.input.insert(c.input.end(), pad_emb_.v.begin(), pad_emb_.v.end());
      } else {
        const TokenId t = prefix[static_cast<size_t>(idx)];
        if (t < 0 || t >= vocab_.size) throw TokenOutOfRangeError("lm prefix token");
        c.slot_tokens[static_cast<size_t>(j)] = t;
        auto row = emb_.v.begin() + static_cast<ptrdiff_t>(t) * d_emb_;
        c.input.insert(c.input.end(), row, row + d_emb_);
      }
    }
    c.hidden.assign(static_cast<size_t>(hidden_), 0.0);
    for (int r = 0; r < hidden_; ++r) {
      double acc = b1_.v[static_cast<size_t>(r)];
      for (int k = 0; k < w1_.cols; ++k) acc += w1_.at(r, k) * c.input[static_cast<size_t>(k)];
      c.hidden[static_cast<size_t>(r)] = std::tanh(acc);
    }
    std::vector<double> logits(static_cast<size_t>(vocab_.size), 0.0);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < vocab_.size; ++r) {
      double acc = b2_.v[static_cast<size_t>(r)];
      for (int k = 0; k < hidden_; ++k) acc += w2_.at(r, k) * c.hidden[static_cast<size_t>(k)];
      logits[static_cast<size_t>(r)] = acc;
      max_logit = std::max(max_logit, acc);
    }
    double z = 0.0;
    for (double& l : logits) {
      l = std::exp(l - max_logit);
      z += l;
    }
    std::vector<double> probs(logits.size());
    for (size_t i = 0; i < logits.size(); ++i)
      probs[i] = std::max(logits[i] / z, kProbFloor);
    c.probs = normalize(probs);
    return c;
  }

  // Softmax cross-entropy backprop for observed token y; accumulates into
  // grads and returns the gradient w.r.t. the context slot.
  std::vector<double> backward(const Cache& c, TokenId y, Gradients& grads) const {
    std::vector<double> d_logits(c.probs.probs);
    d_logits[static_cast<size_t>(y)] -= 1.0;

    std::vector<double>& gw2 = grads.of(w2_);
    std::vector<double>& gb2 = grads.of(b2_);
    std::vector<double> d_hidden(c.hidden.size(), 0.0);
    for (int r = 0; r < vocab_.size; ++r) {
      const double d = d_logits[static_cast<size_t>(r)];
      gb2[static_cast<size_t>(r)] += d;
      for (int k = 0; k < hidden_; ++k) {
        gw2[static_cast<size_t>(r) * hidden_ + k] += d * c.hidden[static_cast<size_t>(k)];
        d_hidden[static_cast<size_t>(k)] += d * w2_.at(r, k);
      }
    }
    std::vector<double>& gw1 = grads.of(w1_);
    std::vector<double>& gb1 = grads.of(b1_);
    std::vector<double> d_input(c.input.size(), 0.0);
    for (int r = 0; r < hidden_; ++r) {
      const double t = c.hidden[static_cast<size_t>(r)];
      const double d = d_hidden[static_cast<size_t>(r)] * (1.0 - t * t);
      gb1[static_cast<size_t>(r)] += d;
      for (int k = 0; k < w1_.cols; ++k) {
        gw1[static_cast<size_t>(r) * w1_.cols + k] += d * c.input[static_cast<size_t>(k)];
        d_input[static_cast<size_t>(k)] += d * w1_.at(r, k);
      }
    }

    std::vector<double> d_ctx_slot(d_input.begin(), d_input.begin() + d_emb_);
    std::vector<double>& gemb = grads.of(emb_);
    std::vector<double>& gpad = grads.of(pad_emb_);
    for (int j = 0; j < window_; ++j) {
      const int tok = c.slot_tokens[static_cast<size_t>(j)];
      const size_t off = static_cast<size_t>(j + 1) * d_emb_;
      if (tok < 0) {
        for (int k = 0; k < d_emb_; ++k) gpad[static_cast<size_t>(k)] += d_input[off + k];
      } else {
        for (int k = 0; k < d_emb_; ++k)
          gemb[static_cast<size_t>(tok) * d_emb_ + k] += d_input[off + k];
      }
    }
    return d_ctx_slot;
  }

  const Vocabulary& vocabulary() const { return vocab_; }
  int embedding_dim() const { return d_emb_; }
  int window() const { return window_; }
  int hidden_dim() const { return hidden_; }
  const std::vector<double>& no_ctx_embedding() const { return no_ctx_emb_.v; }
  Tensor& no_ctx_tensor() { return no_ctx_emb_; }

  std::vector<Tensor*> params() {
    return {&emb_, &pad_emb_, &no_ctx_emb_, &w1_, &b1_, &w2_, &b2_};
  }
  std::vector<const Tensor*> params() const {
    return {&emb_, &pad_emb_, &no_ctx_emb_, &w1_, &b1_, &w2_, &b2_};
  }

 private:
  Vocabulary vocab_;
  int d_emb_;
  int window_;
  int hidden_;
  Tensor emb_, pad_emb_, no_ctx_emb_, w1_, b1_, w2_, b2_;
};

// ---------------------------------------------------------------------------
// Composite VLM: (frozen shared encoder, trainable projector, LM backbone)
// ---------------------------------------------------------------------------

struct TrainExample {
  std::optional<ContextFeatures> ctx;
  std::vector<TokenId> instruction;
  std::vector<TokenId> response;
};

class CompositeVlm final : public LanguageModelInterface {
 public:
  using LanguageModelInterface::next_distribution;

  CompositeVlm(std::shared_ptr<const VisionEncoder> encoder, Projector projector, TinyNeuralLm lm)
      : encoder_(std::move(encoder)), projector_(std::move(projector)), lm_(std::move(lm)) {
    if (projector_.input_dim() != encoder_->output_dim())
      throw DimensionMismatchError("projector input vs encoder output");
    if (projector_.output_dim() != lm_.embedding_dim())
      throw DimensionMismatchError("projector output vs lm embedding");
  }

  Distribution next_distribution(std::span<const TokenId> prefix,
                                 const std::optional<ContextFeatures>& ctx) const override {
    const std::vector<double> slot =
        ctx ? projector_.project(encoder_->encode(*ctx)) : lm_.no_ctx_embedding();
    return lm_.forward(prefix, slot).probs;
  }

  const Vocabulary& vocabulary() const override { return lm_.vocabulary(); }

  // Teacher-forced NLL over a batch: mean over examples of the per-example
  // token log-loss sum. Gradients honor freeze flags (frozen tensors get
  // exact zeros).
  std::pair<double, Gradients> nll_loss_and_gradients(const std::vector<TrainExample>& batch) {
    if (batch.empty()) throw Error("empty batch");
    double loss = 0.0;
    Gradients grads;
    for (const TrainExample& ex : batch) {
      if (ex.response.empty()) throw EmptyResponseError();
      std::optional<Projector::Cache> proj_cache;
      std::vector<double> slot;
      if (ex.ctx) {
        proj_cache = projector_.forward(encoder_->encode(*ex.ctx));
        slot = proj_cache->output;
      } else {
        slot = lm_.no_ctx_embedding();
      }
      std::vector<TokenId> prefix = ex.instruction;
      std::vector<double> d_slot(slot.size(), 0.0);
      for (TokenId y : ex.response) {
        TinyNeuralLm::Cache c = lm_.forward(prefix, slot);
        loss += -std::log(c.probs[y]);
        std::vector<double> d = lm_.backward(c, y, grads);
        for (size_t i = 0; i < d.size(); ++i) d_slot[i] += d[i];
        prefix.push_back(y);
      }
      if (proj_cache) {
        projector_.backward(*proj_cache, d_slot, grads);
      } else {
        std::vector<double>& g = grads.of(lm_.no_ctx_tensor());
        for (size_t i = 0; i < d_slot.size(); ++i) g[i] += d_slot[i];
      }
    }
    grads.scale(1.0 / static_cast<double>(batch.size()));
    for (Tensor* t : params()) {
      if (!t->frozen) continue;
      auto it = grads.by_name.find(t->name);
      if (it != grads.by_name.end()) std::fill(it->second.begin(), it->second.end(), 0.0);
    }
    return {loss / static_cast<double>(batch.size()), std::move(grads)};
  }

  std::vector<Tensor*> params() {
    std::vector<Tensor*> all = lm_.params();
    for (Tensor* t : projector_.params()) all.push_back(t);
    return all;
  }
  std::vector<const Tensor*> params() const {
    std::vector<const Tensor*> all = lm_.params();
    for (const Tensor* t : projector_.params()) all.push_back(t);
    return all;
  }

  void set_freeze(bool projector_trainable, bool backbone_trainable) {
    for (Tensor* t : projector_params_mutable()) t->frozen = !projector_trainable;
    for (Tensor* t : lm_.params()) t->frozen = !backbone_trainable;
  }

  const VisionEncoder& encoder() const { return *encoder_; }
  std::shared_ptr<const VisionEncoder> encoder_ptr() const { return encoder_; }
  Projector& projector() { return projector_; }
  const Projector& projector() const { return projector_; }
  TinyNeuralLm& lm() { return lm_; }
  const TinyNeuralLm& lm() const { return lm_; }

 private:
  std::vector<Tensor*> projector_params_mutable() { return projector_.params(); }

  std::shared_ptr<const VisionEncoder> encoder_;
  Projector projector_;
  TinyNeuralLm lm_;
};

}  // namespace sdlab
