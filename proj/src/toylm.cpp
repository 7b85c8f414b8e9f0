#include "certmark/toylm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "certmark/errors.hpp"

namespace certmark {

std::uint64_t ToyLM::pack_key(std::span<const int> ctx) {
  // 16 bits per token id (+1 so an id of 0 is distinguishable from absence);
  // supports order <= 4 and |V| < 65535.
  std::uint64_t key = 0;
  for (int id : ctx) key = (key << 16) | static_cast<std::uint64_t>(id + 1);
  return key;
}

ToyLM ToyLM::train(const std::vector<TokenSeq>& corpus, int order,
                   double smoothing, const Vocabulary& vocab) {
  if (corpus.empty()) throw DataError("train_toy_lm: empty corpus");
  if (order < 1 || order > 4) throw std::invalid_argument("train_toy_lm: order must be in 1..4");
  if (smoothing <= 0.0) throw std::invalid_argument("train_toy_lm: smoothing must be > 0");
  const int vocab_size = vocab.size();
  if (vocab_size < 1 || vocab_size >= 65535) {
    throw std::invalid_argument("train_toy_lm: vocabulary size out of supported range");
  }

  ToyLM lm;
  lm.vocab_ = &vocab;
  lm.order_ = order;
  lm.smoothing_ = smoothing;
  lm.vocab_size_ = vocab_size;
  lm.uni_.assign(vocab_size, 0);
  lm.levels_.resize(order);

  for (const auto& seq : corpus) {
    const auto& ids = seq.ids;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= vocab_size) {
        throw DataError("train_toy_lm: token id " + std::to_string(ids[i]) +
                        " outside vocabulary of size " + std::to_string(vocab_size));
      }
      lm.uni_[ids[i]]++;
      lm.uni_total_++;
      for (int k = 1; k <= order; ++k) {
        if (i < static_cast<std::size_t>(k)) break;
        const std::uint64_t key =
            pack_key({ids.data() + i - k, static_cast<std::size_t>(k)});
        auto& ctx = lm.levels_[k - 1][key];
        ctx.cnt[ids[i]]++;
        ctx.total++;
      }
    }
  }
  return lm;
}

std::vector<double> ToyLM::probs(std::span<const int> context) const {
  const double av = smoothing_ * vocab_size_;
  std::vector<double> p(vocab_size_);
  // Unigram base: additive smoothing against the uniform distribution.
  for (int t = 0; t < vocab_size_; ++t) {
    p[t] = (static_cast<double>(uni_[t]) + smoothing_) /
           (static_cast<double>(uni_total_) + av);
  }
  const int usable = std::min<int>(order_, static_cast<int>(context.size()));
  for (int k = 1; k <= usable; ++k) {
    const std::uint64_t key = pack_key(context.subspan(context.size() - k));
    const auto it = levels_[k - 1].find(key);
    // An unseen context leaves the distribution at the lower level exactly.
    if (it == levels_[k - 1].end()) continue;
    const auto& ctx = it->second;
    const double denom = static_cast<double>(ctx.total) + av;
    for (int t = 0; t < vocab_size_; ++t) p[t] = av * p[t] / denom;
    for (const auto& [t, c] : ctx.cnt) p[t] += static_cast<double>(c) / denom;
  }
  return p;
}

std::vector<double> ToyLM::logits(const TokenSeq& context) const {
  auto p = probs(context.ids);
  for (double& x : p) x = std::log(x);
  return p;
}

double ToyLM::sequence_logprob(const TokenSeq& prompt, const TokenSeq& continuation) const {
  std::vector<int> ctx = prompt.ids;
  double lp = 0.0;
  for (int t : continuation.ids) {
    lp += std::log(probs(ctx)[t]);
    ctx.push_back(t);
  }
  return lp;
}

namespace {

// Deterministic top-k with (value desc, id asc) tie-break.
std::vector<int> top_k_ids(const std::vector<double>& v, int k) {
  std::vector<int> idx(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) idx[i] = static_cast<int>(i);
  const auto cmp = [&](int a, int b) {
    if (v[a] != v[b]) return v[a] > v[b];
    return a < b;
  };
  const int kk = std::min<int>(k, static_cast<int>(v.size()));
  std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(), cmp);
  idx.resize(kk);
  return idx;
}

}  // namespace

TokenSeq ToyLM::generate_hooked(const TokenSeq& prompt, const DecodeConfig& cfg,
                                const LogitHook& hook) const {
  if (cfg.max_len < 1) throw std::invalid_argument("generate: max_len must be >= 1");
  if (cfg.temperature <= 0.0) throw std::invalid_argument("generate: temperature must be > 0");
  if (cfg.beam_width < 1) throw std::invalid_argument("generate: beam_width must be >= 1");

  if (cfg.strategy == DecodeConfig::Strategy::sample) {
    CounterRng rng(cfg.seed);
    std::vector<int> seq = prompt.ids;
    for (int step = 0; step < cfg.max_len; ++step) {
      auto logits = probs(seq);
      for (double& x : logits) x = std::log(x);
      if (hook) hook(seq, logits);
      // Sample from softmax(logits / T).
      double mx = logits[0];
      for (double x : logits) mx = std::max(mx, x);
      double total = 0.0;
      std::vector<double> wts(logits.size());
      for (std::size_t t = 0; t < logits.size(); ++t) {
        wts[t] = std::exp((logits[t] - mx) / cfg.temperature);
        total += wts[t];
      }
      const double u = rng.next_double() * total;
      double acc = 0.0;
      int pick = static_cast<int>(logits.size()) - 1;
      for (std::size_t t = 0; t < wts.size(); ++t) {
        acc += wts[t];
        if (u < acc) {
          pick = static_cast<int>(t);
          break;
        }
      }
      seq.push_back(pick);
    }
    TokenSeq out;
    out.ns = prompt.ns;
    out.ids.assign(seq.begin() + prompt.ids.size(), seq.end());
    return out;
  }

  // Beam search over hook-modified log-softmax scores.
  struct Beam {
    std::vector<int> ids;
    double score = 0.0;
  };
  std::vector<Beam> beams{{{}, 0.0}};
  std::vector<int> ctx;
  for (int step = 0; step < cfg.max_len; ++step) {
    struct Cand {
      double score;
      int beam;
      int token;
    };
    std::vector<Cand> cands;
    for (std::size_t b = 0; b < beams.size(); ++b) {
      ctx = prompt.ids;
      ctx.insert(ctx.end(), beams[b].ids.begin(), beams[b].ids.end());
      auto logits = probs(ctx);
      for (double& x : logits) x = std::log(x);
      if (hook) hook(ctx, logits);
      // log-softmax of the modified logits.
      double mx = logits[0];
      for (double x : logits) mx = std::max(mx, x);
      double lse = 0.0;
      for (double x : logits) lse += std::exp(x - mx);
      lse = mx + std::log(lse);
      for (int t : top_k_ids(logits, cfg.beam_width)) {
        cands.push_back({beams[b].score + logits[t] - lse, static_cast<int>(b), t});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.beam != b.beam) return a.beam < b.beam;
      return a.token < b.token;
    });
    const int keep = std::min<int>(cfg.beam_width, static_cast<int>(cands.size()));
    std::vector<Beam> next;
    next.reserve(keep);
    for (int i = 0; i < keep; ++i) {
      Beam nb = beams[cands[i].beam];
      nb.ids.push_back(cands[i].token);
      nb.score = cands[i].score;
      next.push_back(std::move(nb));
    }
    beams = std::move(next);
  }
  TokenSeq out;
  out.ns = prompt.ns;
  out.ids = beams.front().ids;
  return out;
}

TokenSeq ToyLM::generate(const TokenSeq& prompt, const DecodeConfig& cfg) const {
  return generate_hooked(prompt, cfg, nullptr);
}

std::vector<ToyLM::LevelEntry> ToyLM::level_entries(int k) const {
  std::vector<LevelEntry> out;
  for (const auto& [key, ctx] : levels_[k - 1]) {
    for (const auto& [t, c] : ctx.cnt) out.push_back({key, t, c});
  }
  std::sort(out.begin(), out.end(), [](const LevelEntry& a, const LevelEntry& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.token < b.token;
  });
  return out;
}

ToyLM ToyLM::from_parts(int order, double smoothing, const Vocabulary& vocab,
                        std::vector<std::int64_t> unigrams,
                        const std::vector<std::vector<LevelEntry>>& levels) {
  if (static_cast<int>(levels.size()) != order) {
    throw DataError("toylm payload: expected " + std::to_string(order) + " levels");
  }
  if (static_cast<int>(unigrams.size()) != vocab.size()) {
    throw DataError("toylm payload: unigram table size mismatch");
  }
  ToyLM lm;
  lm.vocab_ = &vocab;
  lm.order_ = order;
  lm.smoothing_ = smoothing;
  lm.vocab_size_ = vocab.size();
  lm.uni_ = std::move(unigrams);
  lm.uni_total_ = 0;
  for (std::int64_t c : lm.uni_) lm.uni_total_ += c;
  lm.levels_.resize(order);
  for (int k = 1; k <= order; ++k) {
    for (const auto& e : levels[k - 1]) {
      auto& ctx = lm.levels_[k - 1][e.key];
      ctx.cnt[e.token] = e.count;
      ctx.total += e.count;
    }
  }
  return lm;
}

}  // namespace certmark
