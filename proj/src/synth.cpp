#include "certmark/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>

#include "certmark/errors.hpp"

#include "json.hpp"

namespace certmark::synth {

namespace {

const std::vector<std::string> kOnsets = {"b",  "br", "d", "dr", "f",  "fl",
                                          "g",  "gr", "k", "kl", "l",  "m",
                                          "n",  "p",  "pr", "r", "s",  "st",
                                          "t",  "tr", "v",  "z"};
const std::vector<std::string> kNuclei = {"a", "e", "i", "o", "u", "ai", "ea", "io", "ou"};
const std::vector<std::string> kCodas = {"", "", "n", "r", "s", "l", "m"};

std::string pseudo_word(CounterRng& rng) {
  const int syllables = 2 + static_cast<int>(rng.next_below(2));
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    w += kOnsets[rng.next_below(kOnsets.size())];
    w += kNuclei[rng.next_below(kNuclei.size())];
    if (s + 1 == syllables) w += kCodas[rng.next_below(kCodas.size())];
  }
  return w;
}

std::string format_embedding(int dim, double scale, CounterRng& rng) {
  std::ostringstream os;
  os.precision(17);
  for (int j = 0; j < dim; ++j) {
    if (j) os << ' ';
    os << scale * rng.next_normal();
  }
  return os.str();
}

}  // namespace

std::vector<std::string> make_wordlist(int n, std::uint64_t seed) {
  // A few real words the fixtures depend on: "unhappiness" exercises the
  // forced subword split in the LLM vocabulary.
  const std::vector<std::string> real = {"unhappiness"};
  std::set<std::string> seen(real.begin(), real.end());
  seen.insert("zxqv");  // keep reserved as a guaranteed-OOV probe word

  CounterRng rng(seed);
  std::vector<std::string> words;
  words.reserve(n);
  while (static_cast<int>(words.size()) < n - static_cast<int>(real.size())) {
    std::string w = pseudo_word(rng);
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  // Slot the real words at fixed middling frequency ranks.
  for (std::size_t i = 0; i < real.size(); ++i) {
    const auto at = std::min<std::size_t>(137 + i * 100, words.size());
    words.insert(words.begin() + at, real[i]);
  }
  return words;
}

std::string ref_vocab_text(const std::vector<std::string>& words, const VocabConfig& cfg) {
  CounterRng rng = CounterRng(cfg.seed).fork(0);
  std::ostringstream os;
  for (const auto& w : words) os << w << '\t' << format_embedding(cfg.dim, cfg.emb_scale, rng) << '\n';
  os << "." << '\t' << format_embedding(cfg.dim, cfg.emb_scale, rng) << '\n';
  os << "*" << '\t' << format_embedding(cfg.dim, cfg.emb_scale, rng) << '\n';
  return os.str();
}

std::string llm_vocab_text(const std::vector<std::string>& words, const VocabConfig& cfg) {
  CounterRng split_rng = CounterRng(cfg.seed).fork(1);
  CounterRng emb_rng = CounterRng(cfg.seed).fork(2);

  std::vector<std::string> pieces;
  std::set<std::string> seen;
  auto add = [&](const std::string& p) {
    if (seen.insert(p).second) pieces.push_back(p);
  };
  for (const auto& w : words) {
    const bool force_split = w == "unhappiness";
    const bool split = force_split || (w.size() >= 5 && split_rng.next_double() < cfg.split_prob);
    if (!split) {
      add("_" + w);
      continue;
    }
    const int cut = force_split
                        ? 5  // "_unhap" + "piness"
                        : 2 + static_cast<int>(split_rng.next_below(w.size() - 3));
    add("_" + w.substr(0, cut));
    add(w.substr(cut));
  }
  add("_.");
  add("_*");
  add("<unk>");

  std::ostringstream os;
  for (const auto& p : pieces) os << p << '\t' << format_embedding(cfg.dim, cfg.emb_scale, emb_rng) << '\n';
  return os.str();
}

ZipfSampler::ZipfSampler(int n, double s) {
  cum_.resize(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += std::pow(static_cast<double>(i + 1), -s);
    cum_[i] = acc;
  }
}

int ZipfSampler::draw(CounterRng& rng) const {
  const double u = rng.next_double() * cum_.back();
  const auto it = std::lower_bound(cum_.begin(), cum_.end(), u);
  return static_cast<int>(it - cum_.begin());
}

std::vector<std::array<std::string, 3>> stock_phrases(
    const std::vector<std::string>& words, int n_phrases, std::uint64_t seed) {
  CounterRng rng = CounterRng(seed).fork(77);
  std::vector<std::array<std::string, 3>> phrases;
  std::set<std::string> used;  // no shared words across phrases → clean argmax
  while (static_cast<int>(phrases.size()) < n_phrases) {
    std::array<std::string, 3> p;
    bool ok = true;
    // Middling ranks: frequent enough to matter, rare enough that random
    // co-occurrences never outvote the phrase. Clamped so tiny word lists
    // still work.
    const auto lo = std::min<std::uint64_t>(20, words.size() / 4);
    const auto span = std::max<std::uint64_t>(1, std::min<std::uint64_t>(400, words.size() - lo));
    for (auto& w : p) {
      w = words[lo + rng.next_below(span)];
      if (used.count(w)) ok = false;
    }
    if (!ok || p[0] == p[1] || p[1] == p[2] || p[0] == p[2]) continue;
    used.insert(p.begin(), p.end());
    phrases.push_back(std::move(p));
  }
  return phrases;
}

std::string make_document(const std::vector<std::string>& words,
                          const CorpusConfig& cfg, CounterRng& rng) {
  const ZipfSampler zipf(static_cast<int>(words.size()), cfg.zipf_s);
  const auto phrases = stock_phrases(words, cfg.n_phrases, cfg.seed);

  std::ostringstream os;
  int emitted = 0;
  bool first = true;
  auto put = [&](const std::string& w) {
    if (!first) os << ' ';
    os << w;
    first = false;
    ++emitted;
  };
  while (emitted < cfg.doc_words) {
    const int sentence_len = 6 + static_cast<int>(rng.next_below(12));
    for (int k = 0; k < sentence_len && emitted < cfg.doc_words; ++k) {
      if (rng.next_double() < cfg.phrase_prob) {
        const auto& p = phrases[rng.next_below(phrases.size())];
        for (const auto& w : p) put(w);
      } else {
        put(words[zipf.draw(rng)]);
      }
    }
    put(".");
  }
  return os.str();
}

std::vector<std::string> make_corpus(const std::vector<std::string>& words,
                                     const CorpusConfig& cfg) {
  CounterRng root(cfg.seed);
  std::vector<std::string> docs;
  docs.reserve(cfg.n_docs);
  for (int i = 0; i < cfg.n_docs; ++i) {
    CounterRng doc_rng = root.fork(i);
    docs.push_back(make_document(words, cfg, doc_rng));
  }
  return docs;
}

std::string corpus_jsonl(const std::vector<std::string>& docs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    nlohmann::json rec{{"text", docs[i]}, {"label", 0}, {"meta", {{"doc", i}}}};
    os << rec.dump() << '\n';
  }
  return os.str();
}

std::string prompts_jsonl(const std::vector<std::string>& words, int n_prompts,
                          int prompt_words, double zipf_s, std::uint64_t seed) {
  const ZipfSampler zipf(static_cast<int>(words.size()), zipf_s);
  CounterRng root(seed);
  std::ostringstream os;
  for (int i = 0; i < n_prompts; ++i) {
    CounterRng rng = root.fork(i);
    std::string text;
    for (int k = 0; k < prompt_words; ++k) {
      if (k) text.push_back(' ');
      text += words[zipf.draw(rng)];
    }
    nlohmann::json rec{{"text", text}};
    os << rec.dump() << '\n';
  }
  return os.str();
}

}  // namespace certmark::synth
