#include "certmark/detector.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "certmark/errors.hpp"
#include "certmark/rng.hpp"
#include "certmark/smoothing.hpp"

namespace certmark {

namespace {

inline double softsign(double x) { return x / (1.0 + std::fabs(x)); }
inline double softsign_grad(double x) {
  const double t = 1.0 + std::fabs(x);
  return 1.0 / (t * t);
}

}  // namespace

DetectorModel DetectorModel::init(std::uint64_t seed, const Vocabulary& vocab, int w,
                                  int max_len) {
  if (w < 1) throw std::invalid_argument("detector init: w must be >= 1");
  if (max_len < w + 1) throw std::invalid_argument("detector init: max_len must exceed w");
  DetectorModel det;
  det.vocab_ = &vocab;
  det.w_ = w;
  det.d_ = vocab.dim();
  det.max_len_ = max_len;

  const int in_dim = (w + 1) * det.d_;
  const double in_scale = vocab.embedding_rms();
  CounterRng root(seed);
  CounterRng r1 = root.fork(0), r2 = root.fork(1), r3 = root.fork(2);

  det.w1.resize(static_cast<std::size_t>(kFeature) * in_dim);
  for (double& x : det.w1) x = r1.next_normal() / (in_scale * std::sqrt(double(in_dim)));
  det.b1.assign(kFeature, 0.0);
  det.w2.resize(static_cast<std::size_t>(kHiddenCls) * kFeature);
  for (double& x : det.w2) x = r2.next_normal() / std::sqrt(double(kFeature));
  det.b2.assign(kHiddenCls, 0.0);
  det.w3.resize(2 * static_cast<std::size_t>(kHiddenCls));
  for (double& x : det.w3) x = r3.next_normal() / std::sqrt(double(kHiddenCls));
  det.b3.assign(2, 0.0);
  return det;
}

DetectorModel DetectorModel::from_parts(const Vocabulary& vocab, int w, int max_len,
                                        std::vector<double> w1, std::vector<double> b1,
                                        std::vector<double> w2, std::vector<double> b2,
                                        std::vector<double> w3, std::vector<double> b3) {
  DetectorModel det;
  det.vocab_ = &vocab;
  det.w_ = w;
  det.d_ = vocab.dim();
  det.max_len_ = max_len;
  const std::size_t in_dim = static_cast<std::size_t>(w + 1) * det.d_;
  if (w1.size() != kFeature * in_dim || b1.size() != kFeature ||
      w2.size() != static_cast<std::size_t>(kHiddenCls) * kFeature ||
      b2.size() != kHiddenCls || w3.size() != 2 * static_cast<std::size_t>(kHiddenCls) ||
      b3.size() != 2) {
    throw DataError("detector payload: weight shape mismatch");
  }
  det.w1 = std::move(w1);
  det.b1 = std::move(b1);
  det.w2 = std::move(w2);
  det.b2 = std::move(b2);
  det.w3 = std::move(w3);
  det.b3 = std::move(b3);
  return det;
}

namespace {

struct ForwardCache {
  int n_windows = 0;
  std::vector<double> window_x;   // n_windows x in_dim (zero-padded rows)
  std::vector<double> pre1;       // n_windows x kFeature
  std::vector<double> pooled;     // kFeature
  std::vector<double> pre2;       // kHiddenCls
  std::vector<double> g;          // kHiddenCls
  std::array<double, 2> logits{};
  std::array<double, 2> probs{};
};

void run_forward(const DetectorModel& det, const EmbeddingMatrix& e, ForwardCache& c) {
  const int w = det.w(), d = det.dim();
  if (e.d != d) {
    throw DataError("detector forward: embedding dimension " + std::to_string(e.d) +
                    " does not match model dimension " + std::to_string(d));
  }
  if (e.n > det.max_len()) {
    throw DataError("detector forward: input has " + std::to_string(e.n) +
                    " rows, max_len is " + std::to_string(det.max_len()));
  }
  const int in_dim = (w + 1) * d;
  // Windows fully inside the input; degenerate short inputs get one window
  // padded with null (zero) rows.
  c.n_windows = std::max(1, e.n - w);

  c.window_x.assign(static_cast<std::size_t>(c.n_windows) * in_dim, 0.0);
  for (int m = 0; m < c.n_windows; ++m) {
    for (int j = 0; j <= w; ++j) {
      if (m + j >= e.n) break;  // zero padding
      const auto row = e.row(m + j);
      std::copy(row.begin(), row.end(),
                c.window_x.begin() + static_cast<std::size_t>(m) * in_dim + j * d);
    }
  }

  c.pre1.resize(static_cast<std::size_t>(c.n_windows) * DetectorModel::kFeature);
  c.pooled.assign(DetectorModel::kFeature, 0.0);
  for (int m = 0; m < c.n_windows; ++m) {
    const double* x = c.window_x.data() + static_cast<std::size_t>(m) * in_dim;
    for (int h = 0; h < DetectorModel::kFeature; ++h) {
      const double* row = det.w1.data() + static_cast<std::size_t>(h) * in_dim;
      double acc = det.b1[h];
      for (int j = 0; j < in_dim; ++j) acc += row[j] * x[j];
      c.pre1[static_cast<std::size_t>(m) * DetectorModel::kFeature + h] = acc;
      c.pooled[h] += softsign(acc);
    }
  }
  for (double& v : c.pooled) v /= c.n_windows;

  c.pre2.resize(DetectorModel::kHiddenCls);
  c.g.resize(DetectorModel::kHiddenCls);
  for (int h = 0; h < DetectorModel::kHiddenCls; ++h) {
    const double* row = det.w2.data() + static_cast<std::size_t>(h) * DetectorModel::kFeature;
    double acc = det.b2[h];
    for (int j = 0; j < DetectorModel::kFeature; ++j) acc += row[j] * c.pooled[j];
    c.pre2[h] = acc;
    c.g[h] = softsign(acc);
  }
  for (int k = 0; k < 2; ++k) {
    const double* row = det.w3.data() + static_cast<std::size_t>(k) * DetectorModel::kHiddenCls;
    double acc = det.b3[k];
    for (int j = 0; j < DetectorModel::kHiddenCls; ++j) acc += row[j] * c.g[j];
    c.logits[k] = acc;
  }
  const double mx = std::max(c.logits[0], c.logits[1]);
  const double e0 = std::exp(c.logits[0] - mx), e1 = std::exp(c.logits[1] - mx);
  c.probs = {e0 / (e0 + e1), e1 / (e0 + e1)};
}

}  // namespace

std::array<double, 2> DetectorModel::forward(const EmbeddingMatrix& e) const {
  ForwardCache c;
  run_forward(*this, e, c);
  return c.probs;
}

double DetectorModel::loss_and_grads(const EmbeddingMatrix& e, int label,
                                     Grads& grads) const {
  if (label != 0 && label != 1) throw std::invalid_argument("label must be 0 or 1");
  ForwardCache c;
  run_forward(*this, e, c);
  const double loss = -std::log(std::max(c.probs[label], 1e-300));

  const int in_dim = (w_ + 1) * d_;
  if (grads.w1.empty()) {
    grads.w1.assign(w1.size(), 0.0);
    grads.b1.assign(b1.size(), 0.0);
    grads.w2.assign(w2.size(), 0.0);
    grads.b2.assign(b2.size(), 0.0);
    grads.w3.assign(w3.size(), 0.0);
    grads.b3.assign(b3.size(), 0.0);
  }

  // d loss / d logits = probs - onehot(label)
  std::array<double, 2> dlogits = c.probs;
  dlogits[label] -= 1.0;

  std::vector<double> dg(kHiddenCls, 0.0);
  for (int k = 0; k < 2; ++k) {
    for (int j = 0; j < kHiddenCls; ++j) {
      grads.w3[static_cast<std::size_t>(k) * kHiddenCls + j] += dlogits[k] * c.g[j];
      dg[j] += dlogits[k] * w3[static_cast<std::size_t>(k) * kHiddenCls + j];
    }
    grads.b3[k] += dlogits[k];
  }

  std::vector<double> dpooled(kFeature, 0.0);
  for (int h = 0; h < kHiddenCls; ++h) {
    const double dpre2 = dg[h] * softsign_grad(c.pre2[h]);
    for (int j = 0; j < kFeature; ++j) {
      grads.w2[static_cast<std::size_t>(h) * kFeature + j] += dpre2 * c.pooled[j];
      dpooled[j] += dpre2 * w2[static_cast<std::size_t>(h) * kFeature + j];
    }
    grads.b2[h] += dpre2;
  }

  for (int m = 0; m < c.n_windows; ++m) {
    const double* x = c.window_x.data() + static_cast<std::size_t>(m) * in_dim;
    for (int h = 0; h < kFeature; ++h) {
      const double dpre1 = (dpooled[h] / c.n_windows) *
                           softsign_grad(c.pre1[static_cast<std::size_t>(m) * kFeature + h]);
      if (dpre1 == 0.0) continue;
      double* grow = grads.w1.data() + static_cast<std::size_t>(h) * in_dim;
      for (int j = 0; j < in_dim; ++j) grow[j] += dpre1 * x[j];
      grads.b1[h] += dpre1;
    }
  }
  return loss;
}

namespace {

void sgd_step(std::vector<double>& w, const std::vector<double>& g, double scale) {
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= scale * g[i];
}

void zero(DetectorModel::Grads& g) {
  std::fill(g.w1.begin(), g.w1.end(), 0.0);
  std::fill(g.b1.begin(), g.b1.end(), 0.0);
  std::fill(g.w2.begin(), g.w2.end(), 0.0);
  std::fill(g.b2.begin(), g.b2.end(), 0.0);
  std::fill(g.w3.begin(), g.w3.end(), 0.0);
  std::fill(g.b3.begin(), g.b3.end(), 0.0);
}

}  // namespace

std::vector<std::pair<int, NoiseKind>> training_plan(int corpus_size,
                                                     TrainConfig::Strategy strategy) {
  std::vector<std::pair<int, NoiseKind>> plan;
  for (int i = 0; i < corpus_size; ++i) {
    if (strategy == TrainConfig::Strategy::joint) {
      plan.emplace_back(i, NoiseKind::both);
    } else {
      plan.emplace_back(i, NoiseKind::gauss_only);
      plan.emplace_back(i, NoiseKind::shuffle_only);
    }
  }
  return plan;
}

std::vector<double> train_detector(DetectorModel& det,
                                   const std::vector<LabeledSample>& corpus,
                                   const TrainConfig& cfg) {
  if (corpus.empty()) throw DataError("train_detector: empty corpus");
  if (cfg.lr <= 0.0) throw std::invalid_argument("train_detector: lr must be > 0");
  if (cfg.noise.sigma < 0.0 || cfg.noise.lambda < 1) {
    throw std::invalid_argument("train_detector: invalid noise configuration");
  }

  // Pre-split each sample once; noise is drawn fresh at every presentation.
  std::vector<EmbeddingMatrix> ws(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    TokenSeq seq = corpus[i].seq;
    if (static_cast<int>(seq.ids.size()) > det.max_len()) {
      seq.ids.resize(det.max_len());
    }
    ws[i] = split_embedding(seq, det.vocab()).first;
  }

  auto plan = training_plan(static_cast<int>(corpus.size()), cfg.strategy);

  CounterRng root(cfg.seed);
  DetectorModel::Grads grads;
  std::vector<double> trace;
  trace.reserve(cfg.epochs);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    CounterRng epoch_rng = root.fork(epoch);
    CounterRng order_rng = epoch_rng.fork(0);
    order_rng.shuffle(plan);

    double epoch_loss = 0.0;
    int in_batch = 0;
    for (std::size_t p = 0; p < plan.size(); ++p) {
      const auto [idx, kind] = plan[p];
      CounterRng noise_rng = epoch_rng.fork(1 + p);
      EmbeddingMatrix w = (kind == NoiseKind::shuffle_only)
                              ? ws[idx]
                              : phi(ws[idx], cfg.noise.sigma, noise_rng);
      PermutationVector u = PermutationVector::identity(w.n);
      if (kind != NoiseKind::gauss_only) u = theta(u, cfg.noise.lambda, noise_rng);
      const EmbeddingMatrix e = compose(w, u);

      const double loss = det.loss_and_grads(e, corpus[idx].label, grads);
      if (!std::isfinite(loss)) {
        throw NumericError("train_detector: non-finite loss at epoch " +
                           std::to_string(epoch) + ", step " + std::to_string(p));
      }
      epoch_loss += loss;
      ++in_batch;

      if (in_batch == cfg.batch || p + 1 == plan.size()) {
        const double scale = cfg.lr / in_batch;
        sgd_step(det.w1, grads.w1, scale);
        sgd_step(det.b1, grads.b1, scale);
        sgd_step(det.w2, grads.w2, scale);
        sgd_step(det.b2, grads.b2, scale);
        sgd_step(det.w3, grads.w3, scale);
        sgd_step(det.b3, grads.b3, scale);
        zero(grads);
        in_batch = 0;
      }
    }
    trace.push_back(epoch_loss / plan.size());
  }
  return trace;
}

}  // namespace certmark
