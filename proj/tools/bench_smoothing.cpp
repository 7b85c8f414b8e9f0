// Benchmark: serial reference vs OpenMP Monte-Carlo vote sampling. The two
// kernels draw from per-index substreams, so their counts must agree exactly;
// this binary checks that while timing both.
//
//   bench_smoothing [n_tokens=200] [dim=16] [n_draws=2000] [workers=0]
//
// workers=0 means "use omp_get_max_threads()".

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include <omp.h>

#include "certmark/rng.hpp"
#include "certmark/smoothing.hpp"
#include "certmark/tokenspace.hpp"

using namespace certmark;

namespace {

double time_s(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  return dt.count();
}

}  // namespace

int main(int argc, char** argv) {
  const int n = argc > 1 ? std::atoi(argv[1]) : 200;
  const int d = argc > 2 ? std::atoi(argv[2]) : 16;
  const std::int64_t draws = argc > 3 ? std::atoll(argv[3]) : 2000;
  int workers = argc > 4 ? std::atoi(argv[4]) : 0;
  if (workers <= 0) workers = omp_get_max_threads();

  EmbeddingMatrix w;
  w.n = n;
  w.d = d;
  w.a.resize(static_cast<std::size_t>(n) * d);
  CounterRng init(42);
  for (auto& x : w.a) x = 12.0 * init.next_normal();
  const auto u = PermutationVector::identity(n);

  NoiseConfig noise;
  noise.sigma = 15.0;
  noise.lambda = 8;

  // A deliberately compute-heavy vote so the benchmark reflects detector-like
  // work per draw: mean of squared entries against a threshold.
  const VoteFn vote = [](const EmbeddingMatrix& e, CounterRng&) {
    double s = 0.0;
    for (double x : e.a) s += x * x;
    return s / static_cast<double>(e.a.size()) > 12.0 * 12.0 + 15.0 * 15.0 ? 1 : 0;
  };

  std::array<std::int64_t, 2> serial_counts{};
  std::array<std::int64_t, 2> parallel_counts{};
  const double t_serial = time_s([&] {
    serial_counts = sample_counts_serial(vote, w, u, noise, draws, CounterRng(7));
  });
  const double t_parallel = time_s([&] {
    parallel_counts = sample_counts(vote, w, u, noise, draws, CounterRng(7), workers);
  });

  std::printf("tokens=%d dim=%d draws=%lld workers=%d\n", n, d,
              static_cast<long long>(draws), workers);
  std::printf("serial   : %8.3fs  counts = [%lld, %lld]\n", t_serial,
              static_cast<long long>(serial_counts[0]),
              static_cast<long long>(serial_counts[1]));
  std::printf("openmp   : %8.3fs  counts = [%lld, %lld]\n", t_parallel,
              static_cast<long long>(parallel_counts[0]),
              static_cast<long long>(parallel_counts[1]));
  std::printf("speedup  : %8.2fx\n", t_serial / t_parallel);

  if (serial_counts != parallel_counts) {
    std::fprintf(stderr, "FAIL: kernels disagree\n");
    return 1;
  }
  std::printf("kernels agree exactly\n");
  return 0;
}
