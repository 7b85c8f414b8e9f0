#pragma once

#include <array>
#include <cstdint>
#include <functional>

#include "certmark/detector.hpp"
#include "certmark/rng.hpp"
#include "certmark/tokenspace.hpp"

namespace certmark {

enum class Label { unwatermarked = 0, watermarked = 1, abstain = 2 };

enum class CertifyMode { paper, two_stage };

struct CertifiedResult {
  Label label = Label::abstain;
  double p_value = 1.0;
  double pA_lower = 0.0;
  double pB_upper = 0.0;
  double rad_e = 0.0;  // embedding-space l2 (Frobenius) radius
  double rad_p = 0.0;  // permutation-space l1 radius
  std::int64_t n_A = 0;
  std::int64_t n_B = 0;
  std::int64_t N0 = 0;
  double alpha = 0.0;
};

// Gaussian embedding perturbation: W + eps, eps ~ N(0, sigma^2) i.i.d.
EmbeddingMatrix phi(const EmbeddingMatrix& w, double sigma, CounterRng& rng);

// Uniform permutation noise: consecutive index groups of length lambda (last
// group possibly shorter), each independently shuffled.
PermutationVector theta(const PermutationVector& u, int lambda, CounterRng& rng);

// Eqs. (5)-(6): RAD_e = sigma * Phi^{-1}(pA), RAD_p = lambda * (pA - pB),
// both clamped at zero.
std::pair<double, double> radii(double sigma, int lambda, double pA_lower,
                                double pB_upper);

// Base-classifier vote on one noisy draw. The rng argument is the draw's own
// substream (mock detectors may consume it; the real detector ignores it).
using VoteFn = std::function<int(const EmbeddingMatrix& e, CounterRng& rng)>;

// N independent draws of E_i = (W + eps_i) • theta(U, rho_i); returns votes
// per class. Each draw uses the substream rng.fork(i), so the result is
// identical for any worker count; workers > 1 runs the draws under OpenMP.
std::array<std::int64_t, 2> sample_counts(const VoteFn& vote, const EmbeddingMatrix& w,
                                          const PermutationVector& u,
                                          const NoiseConfig& noise, std::int64_t n,
                                          CounterRng rng, int workers = 1);

// Plain serial loop kept as the reference implementation for the parallel
// kernel (exercised by tests and the benchmark).
std::array<std::int64_t, 2> sample_counts_serial(const VoteFn& vote,
                                                 const EmbeddingMatrix& w,
                                                 const PermutationVector& u,
                                                 const NoiseConfig& noise,
                                                 std::int64_t n, CounterRng rng);

// Monte-Carlo PREDICT/CERTIFY. mode=paper follows Alg. 4: one batch of N0
// draws, a two-sided binomial test at alpha gating the answer, Clopper-Pearson
// lower bound on the majority class, pB_upper = 1 - pA_lower. mode=two_stage
// picks the candidate class from n_sel draws, then bounds it with N0 fresh
// draws and certifies iff pA_lower > 1/2 (p_value is then the one-sided tail).
CertifiedResult certify_votes(const VoteFn& vote, const EmbeddingMatrix& w,
                              const PermutationVector& u, const NoiseConfig& noise,
                              std::int64_t n0, double alpha, CertifyMode mode,
                              std::int64_t n_sel, CounterRng rng, int workers = 1);

// End-to-end certification of a reference-namespace sequence. Sequences
// longer than the detector's max_len are truncated (long inputs belong to the
// sliding-window path).
CertifiedResult certify(const DetectorModel& det, const TokenSeq& seq,
                        const NoiseConfig& noise, std::int64_t n0, double alpha,
                        CertifyMode mode, std::int64_t n_sel, CounterRng rng,
                        int workers = 1);

}  // namespace certmark
