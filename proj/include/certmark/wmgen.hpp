#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "certmark/tokenspace.hpp"
#include "certmark/toylm.hpp"

namespace certmark {

struct GenParams {
  int w = 2;            // generator window uses w+1 tokens
  double delta = 2.0;   // logit boost for green tokens
  int top_k = 20;       // candidate pool per step
  int bridge_n = 30;    // tokenizer-bridge context length
};

// Keyed green/red decision network: the (w+1)-window's reference embeddings,
// concatenated, pass through one tanh layer to a scalar score; green means
// score > tau. The embedding table is the reference vocabulary's, shared
// verbatim with the detector. All window positions carry equal weight, so
// corrupting any token of a window rerolls its bit — which is exactly what
// the marker-insertion attack exploits.
class GeneratorModel {
 public:
  static constexpr int kHidden = 64;
  static constexpr double kPrefixScale = 1.0;

  static GeneratorModel init(std::uint64_t seed, const Vocabulary& ref_vocab,
                             double target_gamma, int w = 2);

  double score(std::span<const int> window) const;
  bool is_green(std::span<const int> window) const { return score(window) > tau_; }

  int w() const { return w_; }
  double gamma() const { return gamma_; }
  double tau() const { return tau_; }
  std::uint64_t seed() const { return seed_; }
  const Vocabulary& vocab() const { return *vocab_; }

  // Persistence plumbing.
  const std::vector<double>& w1() const { return w1_; }
  const std::vector<double>& w2() const { return w2_; }
  static GeneratorModel from_parts(std::uint64_t seed, const Vocabulary& vocab,
                                   int w, double gamma, double tau,
                                   std::vector<double> w1, std::vector<double> w2);

 private:
  GeneratorModel() = default;

  const Vocabulary* vocab_ = nullptr;
  int w_ = 2;
  double gamma_ = 0.5;
  double tau_ = 0.0;
  std::uint64_t seed_ = 0;
  std::vector<double> w1_;  // kHidden x (w+1)*dim
  std::vector<double> w2_;  // kHidden
};

// Alg. 2: keep the candidates whose bridge-encoded (w+1)-window ends green.
// `prefix` is the LLM-namespace context generated so far.
std::vector<int> select_green(const GeneratorModel& gen, std::span<const int> prefix,
                              std::span<const int> candidates,
                              const Vocabulary& llm_vocab, const Vocabulary& ref_vocab,
                              const GenParams& params);

// Alg. 3: per step, boost green members of the top-K logits by delta, then
// decode as usual. delta = 0 reproduces ToyLM::generate bit for bit.
TokenSeq generate_watermarked(const ToyLM& lm, const GeneratorModel& gen,
                              const TokenSeq& prompt, const GenParams& params,
                              const DecodeConfig& cfg);

// Emoji-style attack: a marker token is appended after every generated token
// (corrupting the generator windows); `stripped` is the marker-free text an
// attacker would publish. Sampling strategy only.
struct MarkedGeneration {
  TokenSeq marked;
  TokenSeq stripped;
};
MarkedGeneration generate_with_markers(const ToyLM& lm, const GeneratorModel& gen,
                                       const TokenSeq& prompt, const GenParams& params,
                                       const DecodeConfig& cfg, int marker_id);

}  // namespace certmark
