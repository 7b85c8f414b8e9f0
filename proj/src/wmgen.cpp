#include "certmark/wmgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "certmark/errors.hpp"
#include "certmark/rng.hpp"

namespace certmark {

namespace {

// Uniformly random (w+1)-token windows over the full id range (OOV buckets
// included: real windows contain them too).
std::vector<double> window_scores(const GeneratorModel& gen, const Vocabulary& vocab,
                                  int w, int n_windows, CounterRng rng) {
  std::vector<double> scores(n_windows);
  std::vector<int> window(w + 1);
  for (int i = 0; i < n_windows; ++i) {
    for (int& id : window) id = static_cast<int>(rng.next_below(vocab.total_ids()));
    scores[i] = gen.score(window);
  }
  return scores;
}

}  // namespace

double GeneratorModel::score(std::span<const int> window) const {
  if (static_cast<int>(window.size()) != w_ + 1) {
    throw std::invalid_argument("is_green: window must have exactly w+1 tokens");
  }
  const int d = vocab_->dim();
  const int in_dim = (w_ + 1) * d;
  double out = 0.0;
  for (int h = 0; h < kHidden; ++h) {
    const double* row = w1_.data() + static_cast<std::size_t>(h) * in_dim;
    double pre = 0.0;
    for (int j = 0; j <= w_; ++j) {
      const auto e = vocab_->embedding(window[j]);
      const double* cols = row + j * d;
      for (int c = 0; c < d; ++c) pre += cols[c] * e[c];
    }
    out += w2_[h] * std::tanh(pre);
  }
  return out;
}

GeneratorModel GeneratorModel::init(std::uint64_t seed, const Vocabulary& ref_vocab,
                                    double target_gamma, int w) {
  if (!(target_gamma > 0.0 && target_gamma < 1.0)) {
    throw std::invalid_argument("init_generator: target_gamma must lie in (0,1)");
  }
  if (w < 1) throw std::invalid_argument("init_generator: w must be >= 1");

  const int d = ref_vocab.dim();
  const int in_dim = (w + 1) * d;
  const double rms = ref_vocab.embedding_rms();
  // Unit pre-activation variance: sum over blocks of block_scale^2 * d / norm.
  const double d_eff = d * (w * kPrefixScale * kPrefixScale + 1.0);

  constexpr int kCalibWindows = 10000;
  constexpr int kMaxAttempts = 8;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    GeneratorModel gen;
    gen.vocab_ = &ref_vocab;
    gen.w_ = w;
    gen.gamma_ = target_gamma;
    gen.seed_ = seed;

    CounterRng root = CounterRng(seed).fork(attempt);
    CounterRng w1_rng = root.fork(0);
    CounterRng w2_rng = root.fork(1);
    gen.w1_.resize(static_cast<std::size_t>(kHidden) * in_dim);
    for (int h = 0; h < kHidden; ++h) {
      for (int j = 0; j <= w; ++j) {
        const double block = (j == w) ? 1.0 : kPrefixScale;
        const double scale = block / (rms * std::sqrt(d_eff));
        for (int c = 0; c < d; ++c) {
          gen.w1_[static_cast<std::size_t>(h) * in_dim + j * d + c] =
              scale * w1_rng.next_normal();
        }
      }
    }
    gen.w2_.resize(kHidden);
    for (double& x : gen.w2_) x = w2_rng.next_normal() / std::sqrt(double(kHidden));

    // Calibrate tau as the (1-gamma) empirical quantile, then verify on a
    // fresh window sample.
    auto scores = window_scores(gen, ref_vocab, w, kCalibWindows, root.fork(2));
    std::sort(scores.begin(), scores.end());
    const int idx = static_cast<int>((1.0 - target_gamma) * kCalibWindows);
    gen.tau_ = scores[std::min(idx, kCalibWindows - 1)];

    const auto fresh = window_scores(gen, ref_vocab, w, kCalibWindows, root.fork(3));
    int green = 0;
    for (double s : fresh) green += s > gen.tau_;
    const double frac = static_cast<double>(green) / kCalibWindows;
    if (std::fabs(frac - target_gamma) <= 0.02) return gen;
  }
  throw NumericError("init_generator: calibration failed to reach gamma within +/-0.02 after " +
                     std::to_string(kMaxAttempts) + " attempts");
}

GeneratorModel GeneratorModel::from_parts(std::uint64_t seed, const Vocabulary& vocab,
                                          int w, double gamma, double tau,
                                          std::vector<double> w1, std::vector<double> w2) {
  GeneratorModel gen;
  gen.vocab_ = &vocab;
  gen.w_ = w;
  gen.gamma_ = gamma;
  gen.tau_ = tau;
  gen.seed_ = seed;
  const std::size_t want1 = static_cast<std::size_t>(kHidden) * (w + 1) * vocab.dim();
  if (w1.size() != want1 || w2.size() != static_cast<std::size_t>(kHidden)) {
    throw DataError("generator payload: weight shape mismatch");
  }
  gen.w1_ = std::move(w1);
  gen.w2_ = std::move(w2);
  return gen;
}

std::vector<int> select_green(const GeneratorModel& gen, std::span<const int> prefix,
                              std::span<const int> candidates,
                              const Vocabulary& llm_vocab, const Vocabulary& ref_vocab,
                              const GenParams& params) {
  const int w = params.w;
  if (static_cast<int>(prefix.size()) < w) {
    throw std::invalid_argument("select_green: prefix must have at least w tokens");
  }
  // Keep enough context that each of the last w bridge positions sees its full
  // N-window.
  const int keep = std::min<int>(prefix.size(), params.bridge_n + w);
  std::vector<int> ctx(prefix.end() - keep, prefix.end());

  // Bridge ids of the prefix positions of the window, shared by every
  // candidate.
  std::vector<int> window(w + 1);
  for (int j = 0; j < w; ++j) {
    const int pos = static_cast<int>(ctx.size()) - w + j;
    window[j] = bridge_at(ctx, pos, llm_vocab, ref_vocab, params.bridge_n);
  }

  std::vector<int> green;
  ctx.push_back(0);  // slot for the candidate
  for (int t : candidates) {
    ctx.back() = t;
    window[w] = bridge_at(ctx, static_cast<int>(ctx.size()) - 1, llm_vocab,
                          ref_vocab, params.bridge_n);
    if (gen.is_green(window)) green.push_back(t);
  }
  return green;
}

namespace {

std::vector<int> top_k_logits(const std::vector<double>& logits, int k) {
  std::vector<int> idx(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) idx[i] = static_cast<int>(i);
  const int kk = std::min<int>(k, static_cast<int>(logits.size()));
  std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(), [&](int a, int b) {
    if (logits[a] != logits[b]) return logits[a] > logits[b];
    return a < b;
  });
  idx.resize(kk);
  return idx;
}

}  // namespace

TokenSeq generate_watermarked(const ToyLM& lm, const GeneratorModel& gen,
                              const TokenSeq& prompt, const GenParams& params,
                              const DecodeConfig& cfg) {
  const auto hook = [&](std::span<const int> prefix, std::vector<double>& logits) {
    const auto topk = top_k_logits(logits, params.top_k);
    for (int t : select_green(gen, prefix, topk, lm.vocab(), gen.vocab(), params)) {
      logits[t] += params.delta;
    }
  };
  return lm.generate_hooked(prompt, cfg, hook);
}

MarkedGeneration generate_with_markers(const ToyLM& lm, const GeneratorModel& gen,
                                       const TokenSeq& prompt, const GenParams& params,
                                       const DecodeConfig& cfg, int marker_id) {
  if (cfg.strategy != DecodeConfig::Strategy::sample) {
    throw std::invalid_argument("generate_with_markers: sampling strategy only");
  }
  CounterRng rng(cfg.seed);
  std::vector<int> seq = prompt.ids;
  MarkedGeneration out;
  out.marked.ns = out.stripped.ns = prompt.ns;

  for (int step = 0; step < cfg.max_len; ++step) {
    auto p = lm.probs(seq);
    std::vector<double> logits(p.size());
    for (std::size_t t = 0; t < p.size(); ++t) logits[t] = std::log(p[t]);
    const auto topk = top_k_logits(logits, params.top_k);
    for (int t : select_green(gen, seq, topk, lm.vocab(), gen.vocab(), params)) {
      logits[t] += params.delta;
    }
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
    // The marker rides along in the context, so subsequent generator windows
    // are evaluated on corrupted prefixes.
    seq.push_back(pick);
    seq.push_back(marker_id);
    out.marked.ids.push_back(pick);
    out.marked.ids.push_back(marker_id);
    out.stripped.ids.push_back(pick);
  }
  return out;
}

}  // namespace certmark
