#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sdlab/core.hpp"

namespace sdlab {

// Toy stand-in for an image: a fixed-dimension feature vector.
struct ContextFeatures {
  std::vector<double> features;

  ContextFeatures() = default;
  explicit ContextFeatures(std::vector<double> f) : features(std::move(f)) {}
  int dim() const { return static_cast<int>(features.size()); }
};

// Anything that maps (token prefix, optional context) to a next-token
// distribution. Houses both the target p and the drafter q. Implementations
// must be deterministic and immutable during inference.
class LanguageModelInterface {
 public:
  virtual ~LanguageModelInterface() = default;

  virtual Distribution next_distribution(std::span<const TokenId> prefix,
                                         const std::optional<ContextFeatures>& ctx) const = 0;
  virtual const Vocabulary& vocabulary() const = 0;

  Distribution next_distribution(const std::vector<TokenId>& prefix,
                                 const std::optional<ContextFeatures>& ctx = std::nullopt) const {
    return next_distribution(std::span<const TokenId>(prefix), ctx);
  }
};

// Adapter that ignores context: the text-only drafting baseline.
class TextOnlyView final : public LanguageModelInterface {
 public:
  using LanguageModelInterface::next_distribution;

  explicit TextOnlyView(const LanguageModelInterface& inner) : inner_(inner) {}

  Distribution next_distribution(std::span<const TokenId> prefix,
                                 const std::optional<ContextFeatures>&) const override {
    return inner_.next_distribution(prefix, std::nullopt);
  }
  const Vocabulary& vocabulary() const override { return inner_.vocabulary(); }

 private:
  const LanguageModelInterface& inner_;
};

// Exact-probability oracle: maps (last-k token window, quantized ctx bucket)
// to a stored distribution, with a fallback for unseen windows. Lookups are
// bit-exact, which is what makes brute-force enumeration checks possible.
class TabularModel final : public LanguageModelInterface {
 public:
  using LanguageModelInterface::next_distribution;
  using Key = std::pair<std::vector<TokenId>, int>;

  TabularModel(Vocabulary vocab, int order, Distribution fallback)
      : vocab_(vocab), order_(order), fallback_(std::move(fallback)) {
    if (order_ < 0) throw Error("order must be >= 0");
    check_distribution(fallback_);
  }

  void set_entry(std::vector<TokenId> window, int bucket, Distribution d) {
    check_distribution(d);
    table_[Key(std::move(window), bucket)] = std::move(d);
  }
  void set_entry(std::vector<TokenId> window, Distribution d) {
    set_entry(std::move(window), 0, std::move(d));
  }

  // ctx quantization: bucket 0 when absent, otherwise a sign code of the
  // features. Coarse on purpose; tabular tasks mostly run context-free.
  static int bucket_of(const std::optional<ContextFeatures>& ctx) {
    if (!ctx) return 0;
    int code = 0;
    for (size_t i = 0; i < ctx->features.size() && i < 4; ++i)
      if (ctx->features[i] > 0.0) code |= 1 << i;
    return code + 1;
  }

  Distribution next_distribution(std::span<const TokenId> prefix,
                                 const std::optional<ContextFeatures>& ctx) const override {
    for (TokenId t : prefix)
      if (t < 0 || t >= vocab_.size) throw TokenOutOfRangeError("tabular prefix token");
    const size_t keep = std::min(prefix.size(), static_cast<size_t>(order_));
    std::vector<TokenId> window(prefix.end() - static_cast<ptrdiff_t>(keep), prefix.end());
    auto it = table_.find(Key(std::move(window), bucket_of(ctx)));
    return it != table_.end() ? it->second : fallback_;
  }

  const Vocabulary& vocabulary() const override { return vocab_; }
  int order() const { return order_; }

 private:
  void check_distribution(const Distribution& d) const {
    if (d.size() != vocab_.size) throw DimensionMismatchError("tabular distribution size");
    if (!d.valid()) throw Error("tabular entry is not a valid distribution");
  }

  Vocabulary vocab_;
  int order_;
  Distribution fallback_;
  std::map<Key, Distribution> table_;
};

}  // namespace sdlab
