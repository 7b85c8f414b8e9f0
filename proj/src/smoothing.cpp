#include "certmark/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <omp.h>

#include "certmark/errors.hpp"
#include "certmark/stats.hpp"

namespace certmark {

EmbeddingMatrix phi(const EmbeddingMatrix& w, double sigma, CounterRng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("phi: sigma must be >= 0");
  EmbeddingMatrix out = w;
  if (sigma == 0.0) return out;
  for (double& x : out.a) x += sigma * rng.next_normal();
  return out;
}

PermutationVector theta(const PermutationVector& u, int lambda, CounterRng& rng) {
  if (lambda < 1) throw std::invalid_argument("theta: lambda must be >= 1");
  PermutationVector out = u;
  if (lambda == 1) return out;
  const int n = static_cast<int>(out.indices.size());
  for (int g = 0; g < n; g += lambda) {
    const int hi = std::min(g + lambda, n);
    // Fisher-Yates over the group slice.
    for (int i = hi - g; i > 1; --i) {
      std::swap(out.indices[g + i - 1], out.indices[g + rng.next_below(i)]);
    }
  }
  return out;
}

std::pair<double, double> radii(double sigma, int lambda, double pA_lower,
                                double pB_upper) {
  if (!(pB_upper >= 0.0 && pB_upper <= pA_lower && pA_lower <= 1.0)) {
    throw std::invalid_argument("radii: need 0 <= pB_upper <= pA_lower <= 1");
  }
  double rad_e = 0.0;
  if (pA_lower > 0.0 && pA_lower < 1.0) {
    rad_e = std::max(0.0, sigma * stats::norm_inv_cdf(pA_lower));
  } else if (pA_lower == 1.0) {
    rad_e = std::numeric_limits<double>::infinity();
  }
  const double rad_p = std::max(0.0, lambda * (pA_lower - pB_upper));
  return {rad_e, rad_p};
}

namespace {

inline int one_draw(const VoteFn& vote, const EmbeddingMatrix& w,
                    const PermutationVector& u, const NoiseConfig& noise,
                    CounterRng draw_rng) {
  EmbeddingMatrix wn = phi(w, noise.sigma, draw_rng);
  PermutationVector un = theta(u, noise.lambda, draw_rng);
  const EmbeddingMatrix e = compose(wn, un);
  const int c = vote(e, draw_rng);
  if (c != 0 && c != 1) throw NumericError("sample_counts: vote outside {0,1}");
  return c;
}

}  // namespace

std::array<std::int64_t, 2> sample_counts_serial(const VoteFn& vote,
                                                 const EmbeddingMatrix& w,
                                                 const PermutationVector& u,
                                                 const NoiseConfig& noise,
                                                 std::int64_t n, CounterRng rng) {
  std::array<std::int64_t, 2> counts{0, 0};
  for (std::int64_t i = 0; i < n; ++i) counts[one_draw(vote, w, u, noise, rng.fork(i))]++;
  return counts;
}

std::array<std::int64_t, 2> sample_counts(const VoteFn& vote, const EmbeddingMatrix& w,
                                          const PermutationVector& u,
                                          const NoiseConfig& noise, std::int64_t n,
                                          CounterRng rng, int workers) {
  if (n < 1) throw std::invalid_argument("sample_counts: n must be >= 1");
  if (workers <= 1) return sample_counts_serial(vote, w, u, noise, n, rng);

  std::int64_t c1 = 0;
#pragma omp parallel for schedule(static) num_threads(workers) reduction(+ : c1)
  for (std::int64_t i = 0; i < n; ++i) {
    c1 += one_draw(vote, w, u, noise, rng.fork(i));
  }
  return {n - c1, c1};
}

namespace {

CertifiedResult abstain_result(double p_value, std::int64_t n_a, std::int64_t n_b,
                               std::int64_t n0, double alpha) {
  CertifiedResult r;
  r.label = Label::abstain;
  r.p_value = p_value;
  r.n_A = n_a;
  r.n_B = n_b;
  r.N0 = n0;
  r.alpha = alpha;
  return r;
}

}  // namespace

CertifiedResult certify_votes(const VoteFn& vote, const EmbeddingMatrix& w,
                              const PermutationVector& u, const NoiseConfig& noise,
                              std::int64_t n0, double alpha, CertifyMode mode,
                              std::int64_t n_sel, CounterRng rng, int workers) {
  if (n0 < 1) throw std::invalid_argument("certify: N0 must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("certify: alpha must lie in (0,1)");
  }

  int candidate;
  std::int64_t n_a, n_b;
  double p_value;

  if (mode == CertifyMode::paper) {
    // Alg. 4: the same N0 draws pick the class and feed the bound.
    const auto counts = sample_counts(vote, w, u, noise, n0, rng.fork(0), workers);
    candidate = counts[1] > counts[0] ? 1 : 0;
    n_a = counts[candidate];
    n_b = counts[1 - candidate];
    p_value = stats::binom_two_sided_p(n_a, n0);
    if (p_value > alpha) return abstain_result(p_value, n_a, n_b, n0, alpha);
  } else {
    if (n_sel < 1) throw std::invalid_argument("certify: two_stage needs n_sel >= 1");
    const auto sel = sample_counts(vote, w, u, noise, n_sel, rng.fork(1), workers);
    if (sel[0] == sel[1]) return abstain_result(1.0, sel[0], sel[1], n0, alpha);
    candidate = sel[1] > sel[0] ? 1 : 0;
    const auto counts = sample_counts(vote, w, u, noise, n0, rng.fork(2), workers);
    n_a = counts[candidate];
    n_b = counts[1 - candidate];
    // One-sided tail for the pre-selected candidate; pA_lower > 1/2 at level
    // alpha is equivalent to this p-value falling below alpha.
    p_value = std::exp(stats::log_binom_upper_tail_half(n_a, n0));
  }

  const double pA = stats::clopper_pearson_lower(n_a, n0, alpha);
  if (mode == CertifyMode::two_stage && pA <= 0.5) {
    return abstain_result(p_value, n_a, n_b, n0, alpha);
  }
  const double pB = 1.0 - pA;

  CertifiedResult r;
  r.label = candidate == 1 ? Label::watermarked : Label::unwatermarked;
  r.p_value = p_value;
  r.pA_lower = pA;
  r.pB_upper = pB;
  std::tie(r.rad_e, r.rad_p) = radii(noise.sigma, noise.lambda, pA, pB);
  r.n_A = n_a;
  r.n_B = n_b;
  r.N0 = n0;
  r.alpha = alpha;
  return r;
}

CertifiedResult certify(const DetectorModel& det, const TokenSeq& seq,
                        const NoiseConfig& noise, std::int64_t n0, double alpha,
                        CertifyMode mode, std::int64_t n_sel, CounterRng rng,
                        int workers) {
  TokenSeq clipped = seq;
  if (static_cast<int>(clipped.ids.size()) > det.max_len()) {
    clipped.ids.resize(det.max_len());
  }
  const auto [w, u] = split_embedding(clipped, det.vocab());
  const VoteFn vote = [&det](const EmbeddingMatrix& e, CounterRng&) {
    return det.vote(e);
  };
  return certify_votes(vote, w, u, noise, n0, alpha, mode, n_sel, rng, workers);
}

}  // namespace certmark
