#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "certmark/rng.hpp"

namespace certmark::synth {

// Knobs for the bundled offline fixtures: a word-level reference vocabulary,
// a subword LLM vocabulary over the same words, and a Zipf-ish corpus with
// injected stock phrases (so n-gram statistics have unambiguous argmaxes).
struct VocabConfig {
  int n_words = 1998;       // content words, including the handful of real ones
  int dim = 16;
  double emb_scale = 12.0;  // per-coordinate std of embeddings
  double split_prob = 0.10; // fraction of words stored as two subword pieces
  std::uint64_t seed = 1;
};

struct CorpusConfig {
  int n_docs = 100;
  int doc_words = 500;        // approximate tokens per document
  double zipf_s = 1.05;       // word-frequency exponent
  double phrase_prob = 0.08;  // chance a position starts a stock phrase
  int n_phrases = 25;
  std::uint64_t seed = 2;
};

// Distinct pronounceable pseudo-words plus a few real words the fixtures rely
// on. Order is frequency rank (element 0 = most frequent).
std::vector<std::string> make_wordlist(int n, std::uint64_t seed);

// Vocabulary file bodies in the `<surface>\t<floats>` format. The reference
// table is the word list plus "." and "*"; the LLM table uses the '_'
// word-initial convention, splits ~split_prob of words in two, and ends with
// "<unk>".
std::string ref_vocab_text(const std::vector<std::string>& words, const VocabConfig& cfg);
std::string llm_vocab_text(const std::vector<std::string>& words, const VocabConfig& cfg);

// Zipf sampler over ranks 0..n-1.
class ZipfSampler {
 public:
  ZipfSampler(int n, double s);
  int draw(CounterRng& rng) const;

 private:
  std::vector<double> cum_;
};

// The injected stock phrases (each three words long, drawn from middling
// ranks) — exposed so tests can check argmax continuations directly.
std::vector<std::array<std::string, 3>> stock_phrases(
    const std::vector<std::string>& words, int n_phrases, std::uint64_t seed);

// One document: sentences of Zipf-sampled words, '.' terminated, with stock
// phrases spliced in.
std::string make_document(const std::vector<std::string>& words,
                          const CorpusConfig& cfg, CounterRng& rng);

// n_docs documents from independent substreams of cfg.seed.
std::vector<std::string> make_corpus(const std::vector<std::string>& words,
                                     const CorpusConfig& cfg);

// JSON-lines corpus body: {"label":0,"meta":{"doc":i},"text":...} per line.
std::string corpus_jsonl(const std::vector<std::string>& docs);

// Short prompt lines sampled from the same distribution.
std::string prompts_jsonl(const std::vector<std::string>& words, int n_prompts,
                          int prompt_words, double zipf_s, std::uint64_t seed);

}  // namespace certmark::synth
