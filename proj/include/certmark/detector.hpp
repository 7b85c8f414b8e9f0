#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "certmark/tokenspace.hpp"

namespace certmark {

struct NoiseConfig {
  double sigma = 15.0;  // Gaussian std in embedding units
  int lambda = 8;       // shuffle group length in index units
};

// Binary watermark detector D = D_cls ∘ D_emb. The embedding table is the
// (frozen) reference vocabulary shared with the generator; windows of w+1
// consecutive rows of E pass through a shared softsign feature layer, are
// mean-pooled, and a 2-layer head emits 2-class probabilities.
class DetectorModel {
 public:
  static constexpr int kFeature = 64;
  static constexpr int kHiddenCls = 32;

  static DetectorModel init(std::uint64_t seed, const Vocabulary& vocab, int w = 2,
                            int max_len = 200);

  // (p_unwatermarked, p_watermarked); E must have <= max_len rows.
  std::array<double, 2> forward(const EmbeddingMatrix& e) const;
  int vote(const EmbeddingMatrix& e) const {
    const auto p = forward(e);
    return p[1] > p[0] ? 1 : 0;
  }

  // Cross-entropy loss for one noisy input plus accumulated parameter
  // gradients (same flat layout as the weight vectors). Used by train() and
  // by the finite-difference gradient check.
  struct Grads {
    std::vector<double> w1, b1, w2, b2, w3, b3;
  };
  double loss_and_grads(const EmbeddingMatrix& e, int label, Grads& grads) const;

  int w() const { return w_; }
  int dim() const { return d_; }
  int max_len() const { return max_len_; }
  const Vocabulary& vocab() const { return *vocab_; }

  std::vector<double> w1, b1;  // kFeature x (w+1)d, kFeature
  std::vector<double> w2, b2;  // kHiddenCls x kFeature, kHiddenCls
  std::vector<double> w3, b3;  // 2 x kHiddenCls, 2

  static DetectorModel from_parts(const Vocabulary& vocab, int w, int max_len,
                                  std::vector<double> w1, std::vector<double> b1,
                                  std::vector<double> w2, std::vector<double> b2,
                                  std::vector<double> w3, std::vector<double> b3);

 private:
  DetectorModel() = default;

  const Vocabulary* vocab_ = nullptr;
  int w_ = 2;
  int d_ = 0;
  int max_len_ = 200;
};

struct LabeledSample {
  TokenSeq seq;  // reference namespace
  int label = 0;
  double z = 0.0;  // generator z-score, recorded at dataset build time
};

struct TrainConfig {
  enum class Strategy { joint, duplicate };
  NoiseConfig noise;
  Strategy strategy = Strategy::duplicate;
  double lr = 0.1;
  int epochs = 10;
  int batch = 16;
  std::uint64_t seed = 7;
};

// Presentation schedule for one epoch before shuffling: (sample index, noise
// kind). joint presents every sample once under both noises; duplicate
// presents two copies per sample (Gaussian-only + shuffle-only), doubling the
// epoch sample count exactly.
enum class NoiseKind { both, gauss_only, shuffle_only };
std::vector<std::pair<int, NoiseKind>> training_plan(int corpus_size,
                                                     TrainConfig::Strategy strategy);

// Noise-injected SGD training. strategy=joint perturbs every sample with both
// noises each epoch; strategy=duplicate presents two copies per sample, one
// Gaussian-only and one shuffle-only. Returns the mean cross-entropy per
// epoch. Deterministic given cfg.seed; single-threaded by contract.
std::vector<double> train_detector(DetectorModel& det,
                                   const std::vector<LabeledSample>& corpus,
                                   const TrainConfig& cfg);

}  // namespace certmark
