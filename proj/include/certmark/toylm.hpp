#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "certmark/rng.hpp"
#include "certmark/tokenspace.hpp"

namespace certmark {

struct DecodeConfig {
  enum class Strategy { sample, beam };
  Strategy strategy = Strategy::sample;
  double temperature = 0.7;
  int beam_width = 3;
  int max_len = 200;
  std::uint64_t seed = 7;
};

// Optional per-step logit rewrite (the watermark boost plugs in here). Called
// with the full prefix (prompt + generated so far) and the raw logits.
using LogitHook = std::function<void(std::span<const int> prefix, std::vector<double>& logits)>;

// Backoff n-gram model with additive smoothing: at each level k the sparse
// counts are interpolated against the level-(k-1) distribution,
//   P_k(t|ctx) = (cnt_k(ctx,t) + a·V·P_{k-1}(t|ctx')) / (tot_k(ctx) + a·V),
// which stays normalized and degrades gracefully to the unigram model on
// unseen contexts. `order` is the number of context tokens consulted.
class ToyLM {
 public:
  static ToyLM train(const std::vector<TokenSeq>& corpus, int order,
                     double smoothing, const Vocabulary& vocab);

  int order() const { return order_; }
  double smoothing() const { return smoothing_; }
  int vocab_size() const { return vocab_size_; }
  const Vocabulary& vocab() const { return *vocab_; }

  // Model distribution over the next token given (a suffix of) the context.
  std::vector<double> probs(std::span<const int> context) const;
  // Natural-log probabilities of the same distribution.
  std::vector<double> logits(const TokenSeq& context) const;

  // Sum of log P over the continuation, scored autoregressively after prompt.
  double sequence_logprob(const TokenSeq& prompt, const TokenSeq& continuation) const;

  // max_len continuation tokens (prompt excluded from the result).
  TokenSeq generate(const TokenSeq& prompt, const DecodeConfig& cfg) const;
  // Same decode loop with a logit rewrite applied before selection; the
  // hook-free call is byte-identical to generate().
  TokenSeq generate_hooked(const TokenSeq& prompt, const DecodeConfig& cfg,
                           const LogitHook& hook) const;

  // Persistence access: (packed context key, token, count) triples per level.
  struct LevelEntry {
    std::uint64_t key;
    int token;
    std::int64_t count;
  };
  std::vector<LevelEntry> level_entries(int k) const;        // k in 1..order
  const std::vector<std::int64_t>& unigram_counts() const { return uni_; }
  static ToyLM from_parts(int order, double smoothing, const Vocabulary& vocab,
                          std::vector<std::int64_t> unigrams,
                          const std::vector<std::vector<LevelEntry>>& levels);

 private:
  struct CtxCounts {
    std::unordered_map<int, std::int64_t> cnt;
    std::int64_t total = 0;
  };

  static std::uint64_t pack_key(std::span<const int> ctx);

  const Vocabulary* vocab_ = nullptr;
  int order_ = 0;
  double smoothing_ = 0.1;
  int vocab_size_ = 0;
  std::vector<std::int64_t> uni_;
  std::int64_t uni_total_ = 0;
  // levels_[k-1]: contexts of exactly k tokens.
  std::vector<std::unordered_map<std::uint64_t, CtxCounts>> levels_;
};

}  // namespace certmark
