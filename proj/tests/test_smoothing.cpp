#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "certmark/dataset.hpp"
#include "certmark/errors.hpp"
#include "certmark/rng.hpp"
#include "certmark/smoothing.hpp"
#include "certmark/stats.hpp"
#include "fixtures.hpp"

using namespace certmark;

namespace {

std::pair<EmbeddingMatrix, PermutationVector> random_input(std::uint64_t seed, int n) {
  const auto& ref = fixtures::ref_vocab();
  CounterRng rng(seed);
  std::vector<int> ids(n);
  for (auto& t : ids) t = static_cast<int>(rng.next_below(ref.total_ids()));
  return split_embedding(TokenSeq{ids, Ns::reference}, ref);
}

const VoteFn always_watermarked = [](const EmbeddingMatrix&, CounterRng&) { return 1; };
const VoteFn fair_coin = [](const EmbeddingMatrix&, CounterRng& rng) {
  return rng.next_double() < 0.5 ? 1 : 0;
};

}  // namespace

TEST_CASE("phi adds zero-mean Gaussian noise of the requested variance") {
  const auto [w, u] = random_input(1, 3);
  CounterRng rng(7);

  const auto same = phi(w, 0.0, rng);
  CHECK(same.a == w.a);

  const double sigma = 15.0;
  const int draws = 100000;
  // Track two fixed entries across draws.
  double s0 = 0.0, s1 = 0.0, q0 = 0.0, q1 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const auto noisy = phi(w, sigma, rng);
    const double e0 = noisy.at(0, 0) - w.at(0, 0);
    const double e1 = noisy.at(2, 5) - w.at(2, 5);
    s0 += e0;
    s1 += e1;
    q0 += e0 * e0;
    q1 += e1 * e1;
  }
  const double bound = 4.0 * sigma / std::sqrt(static_cast<double>(draws));
  CHECK(std::fabs(s0 / draws) <= bound);
  CHECK(std::fabs(s1 / draws) <= bound);
  CHECK(q0 / draws == doctest::Approx(sigma * sigma).epsilon(0.05));
  CHECK(q1 / draws == doctest::Approx(sigma * sigma).epsilon(0.05));

  CHECK_THROWS_AS(phi(w, -1.0, rng), std::invalid_argument);
}

TEST_CASE("theta shuffles within consecutive groups only") {
  CounterRng rng(11);

  for (int n : {1, 4, 9, 17}) {
    const auto id = PermutationVector::identity(n);
    CHECK(theta(id, 1, rng).indices == id.indices);
  }

  const int lambda = 3;
  const auto id = PermutationVector::identity(10);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto out = theta(id, lambda, rng);
    CHECK(out.is_permutation());
    for (std::size_t i = 0; i < out.indices.size(); ++i) {
      CHECK(std::abs(out.indices[i] - static_cast<int>(i)) <= lambda - 1);
    }
  }

  // n=2, lambda=2: identity or adjacent swap; the swap has l1 displacement 2.
  bool saw_swap = false;
  for (int rep = 0; rep < 64 && !saw_swap; ++rep) {
    const auto out = theta(PermutationVector::identity(2), 2, rng);
    if (out.indices[0] == 1) {
      CHECK(out.indices[1] == 0);
      int l1 = std::abs(out.indices[0] - 0) + std::abs(out.indices[1] - 1);
      CHECK(l1 == 2);
      saw_swap = true;
    }
  }
  CHECK(saw_swap);

  CHECK_THROWS_AS(theta(id, 0, rng), std::invalid_argument);
}

TEST_CASE("theta lambda=2 n=4 hits its four outcomes uniformly") {
  CounterRng rng(23);
  const auto id = PermutationVector::identity(4);
  std::array<int, 4> counts{0, 0, 0, 0};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto out = theta(id, 2, rng);
    const int key = (out.indices[0] == 1 ? 1 : 0) + (out.indices[2] == 3 ? 2 : 0);
    ++counts[key];
  }
  for (int k = 0; k < 4; ++k) {
    CHECK(static_cast<double>(counts[k]) / draws == doctest::Approx(0.25).epsilon(0.08));
  }
}

TEST_CASE("radii reproduce the closed forms of Eqs. (5)-(6)") {
  {
    const auto [re, rp] = radii(15.0, 8, 0.5, 0.5);
    CHECK(re == 0.0);
    CHECK(rp == 0.0);
  }
  {
    const auto [re, rp] = radii(15.0, 200, 0.9, 0.1);
    CHECK(re == doctest::Approx(19.223).epsilon(1e-4));
    CHECK(rp == doctest::Approx(160.0).epsilon(1e-12));
  }
  {
    // Degenerate certainty: infinite Gaussian radius, full shuffle radius.
    const auto [re, rp] = radii(15.0, 8, 1.0, 0.0);
    CHECK(std::isinf(re));
    CHECK(rp == 8.0);
  }

  double prev = 0.0;
  for (double pa = 0.51; pa < 0.995; pa += 0.01) {
    const auto [re, rp] = radii(15.0, 8, pa, 1.0 - pa);
    CHECK(re > prev);
    prev = re;
  }

  CHECK_THROWS_AS(radii(15.0, 8, 0.4, 0.6), std::invalid_argument);
}

TEST_CASE("sample_counts: totals, constant vote, fair coin") {
  const auto [w, u] = random_input(2, 40);
  const NoiseConfig noise{15.0, 8};

  const auto constant = sample_counts(always_watermarked, w, u, noise, 500, CounterRng(3));
  CHECK(constant[1] == 500);
  CHECK(constant[0] == 0);

  const auto coin = sample_counts(fair_coin, w, u, noise, 10000, CounterRng(4));
  CHECK(coin[0] + coin[1] == 10000);
  CHECK(coin[1] >= 4500);
  CHECK(coin[1] <= 5500);

  CHECK_THROWS_AS(sample_counts(fair_coin, w, u, noise, 0, CounterRng(4)),
                  std::invalid_argument);
}

TEST_CASE("parallel draws equal the serial reference exactly") {
  const auto [w, u] = random_input(5, 60);
  const NoiseConfig noise{15.0, 8};

  // Vote consumes both the noisy input and the draw's rng substream, so any
  // scheduling mistake would show up in the counts.
  const VoteFn vote = [](const EmbeddingMatrix& e, CounterRng& rng) {
    double s = 0.0;
    for (double x : e.a) s += x;
    return s / static_cast<double>(e.a.size()) + 2.0 * rng.next_normal() > 0.0 ? 1 : 0;
  };

  const auto serial = sample_counts_serial(vote, w, u, noise, 4000, CounterRng(9));
  for (int workers : {1, 2, 3, 8}) {
    const auto par = sample_counts(vote, w, u, noise, 4000, CounterRng(9), workers);
    CHECK(par == serial);
  }
}

TEST_CASE("paper-mode certify matches the Alg. 4 closed forms") {
  const auto [w, u] = random_input(6, 30);
  const NoiseConfig noise{15.0, 8};

  const auto r = certify_votes(always_watermarked, w, u, noise, 100, 0.05,
                               CertifyMode::paper, 0, CounterRng(1));
  CHECK(r.label == Label::watermarked);
  CHECK(r.n_A == 100);
  CHECK(r.n_B == 0);
  CHECK(r.p_value == doctest::Approx(2.0 * std::exp2(-100.0)).epsilon(1e-12));
  CHECK(r.pA_lower == std::pow(0.05, 1.0 / 100.0));
  CHECK(r.pB_upper == 1.0 - r.pA_lower);  // exact binary complement
  CHECK(r.rad_e == doctest::Approx(15.0 * stats::norm_inv_cdf(r.pA_lower)).epsilon(1e-12));
  CHECK(r.rad_p == doctest::Approx(8.0 * (r.pA_lower - r.pB_upper)).epsilon(1e-12));
  CHECK(r.rad_e > 0.0);
  CHECK(r.alpha == 0.05);
  CHECK(r.N0 == 100);

  // The same detector at N0=1000 saturates pA at the k=n Clopper-Pearson cap.
  const auto big = certify_votes(always_watermarked, w, u, noise, 1000, 0.05,
                                 CertifyMode::paper, 0, CounterRng(2));
  CHECK(big.pA_lower == std::pow(0.05, 1.0 / 1000.0));
  CHECK(big.pA_lower > r.pA_lower);

  CHECK_THROWS_AS(certify_votes(always_watermarked, w, u, noise, 0, 0.05,
                                CertifyMode::paper, 0, CounterRng(1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(certify_votes(always_watermarked, w, u, noise, 100, 0.0,
                                CertifyMode::paper, 0, CounterRng(1)),
                  std::invalid_argument);
}

TEST_CASE("certify never labels above alpha and zeroes radii on abstain") {
  const auto [w, u] = random_input(7, 20);
  const NoiseConfig noise{15.0, 8};

  int abstained = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const auto r = certify_votes(fair_coin, w, u, noise, 100, 0.05,
                                 CertifyMode::paper, 0, CounterRng(100 + t));
    if (r.label == Label::abstain) {
      ++abstained;
      CHECK(r.rad_e == 0.0);
      CHECK(r.rad_p == 0.0);
      CHECK(r.pA_lower == 0.0);
    } else {
      CHECK(r.p_value <= 0.05);
      CHECK(r.pB_upper == 1.0 - r.pA_lower);
    }
  }
  // A fair coin rejects at most alpha of the time in expectation.
  CHECK(abstained >= 180);
}

TEST_CASE("two-stage mode uses fresh draws and a one-sided gate") {
  const auto [w, u] = random_input(8, 20);
  const NoiseConfig noise{15.0, 8};

  const VoteFn biased = [](const EmbeddingMatrix&, CounterRng& rng) {
    return rng.next_double() < 0.75 ? 1 : 0;
  };

  const auto r = certify_votes(biased, w, u, noise, 400, 0.05, CertifyMode::two_stage,
                               50, CounterRng(21));
  REQUIRE(r.label == Label::watermarked);
  CHECK(r.pA_lower > 0.5);
  CHECK(r.pA_lower == stats::clopper_pearson_lower(r.n_A, 400, 0.05));
  // One-sided p for the pre-selected candidate.
  CHECK(r.p_value ==
        doctest::Approx(std::exp(stats::log_binom_upper_tail_half(r.n_A, 400)))
            .epsilon(1e-12));
  CHECK(r.p_value <= 0.05);

  // A coin-flip detector abstains: the candidate bound cannot clear 1/2.
  int labeled = 0;
  for (int t = 0; t < 50; ++t) {
    const auto c = certify_votes(fair_coin, w, u, noise, 100, 0.05,
                                 CertifyMode::two_stage, 50, CounterRng(300 + t));
    if (c.label != Label::abstain) {
      ++labeled;
      CHECK(c.p_value <= 0.05);
    }
  }
  CHECK(labeled <= 5);

  CHECK_THROWS_AS(certify_votes(biased, w, u, noise, 100, 0.05, CertifyMode::two_stage,
                                0, CounterRng(1)),
                  std::invalid_argument);
}

TEST_CASE("pA_lower improves with N0 as a trend over seeds") {
  const auto [w, u] = random_input(9, 20);
  const NoiseConfig noise{15.0, 8};
  const VoteFn biased = [](const EmbeddingMatrix&, CounterRng& rng) {
    return rng.next_double() < 0.75 ? 1 : 0;
  };

  double prev_mean = 0.0;
  for (std::int64_t n0 : {100, 400, 1600}) {
    double mean = 0.0;
    int certified = 0;
    for (int s = 0; s < 20; ++s) {
      const auto r = certify_votes(biased, w, u, noise, n0, 0.05, CertifyMode::paper,
                                   0, CounterRng(1000 + s));
      if (r.label != Label::abstain) {
        mean += r.pA_lower;
        ++certified;
      }
    }
    REQUIRE(certified == 20);
    mean /= certified;
    CHECK(mean > prev_mean);
    prev_mean = mean;
  }
}

TEST_CASE("a trained detector certifies a held-out watermarked sample") {
  const auto& ref = fixtures::ref_vocab();
  const auto all = fixtures::corpus_llm_seqs();

  DecodeConfig dcfg;
  dcfg.max_len = 200;
  dcfg.seed = 41;
  const std::vector<TokenSeq> train_docs(all.begin(), all.begin() + 40);
  const auto train = build_dataset(fixtures::toy_lm(), fixtures::generator(), 20, 20,
                                   train_docs, GenParams{}, dcfg);

  auto det = DetectorModel::init(1, ref);
  TrainConfig tcfg;
  tcfg.noise = {15.0, 8};
  tcfg.epochs = 6;
  train_detector(det, train, tcfg);

  DecodeConfig hcfg = dcfg;
  hcfg.seed = 42;
  const std::vector<TokenSeq> held_docs(all.begin() + 40, all.begin() + 60);
  const auto held = build_dataset(fixtures::toy_lm(), fixtures::generator(), 3, 3,
                                  held_docs, GenParams{}, hcfg);

  const NoiseConfig noise{15.0, 8};
  for (const auto& s : held) {
    if (s.label != 1) continue;
    const auto r = certify(det, s.seq, noise, 1000, 0.05, CertifyMode::paper, 0,
                           CounterRng(77), 4);
    CHECK(r.label == Label::watermarked);
    CHECK(r.rad_e > 0.0);
    CHECK(r.rad_p > 0.0);
    break;
  }

  // Truncation: certifying a long sequence equals certifying its prefix.
  TokenSeq long_seq = held.front().seq;
  long_seq.ids.resize(300, 5);
  TokenSeq prefix = long_seq;
  prefix.ids.resize(det.max_len());
  const auto a = certify(det, long_seq, noise, 50, 0.05, CertifyMode::paper, 0,
                         CounterRng(5));
  const auto b = certify(det, prefix, noise, 50, 0.05, CertifyMode::paper, 0,
                         CounterRng(5));
  CHECK(a.n_A == b.n_A);
  CHECK(a.label == b.label);
}
