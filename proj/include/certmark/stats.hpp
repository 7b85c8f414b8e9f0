#pragma once

#include <cstdint>

namespace certmark::stats {

/// Standard normal CDF.
double norm_cdf(double x);

/// Standard normal quantile Phi^-1(p). Throws std::invalid_argument unless
/// 0 < p < 1. Absolute error well below 1e-9 (Wichura's PPND16 rational
/// approximation).
double norm_inv_cdf(double p);

/// log of the regularized incomplete beta function I_x(a, b), evaluated by
/// continued fraction. Returns the plain value (not log).
double reg_inc_beta(double a, double b, double x);

/// Exact one-sided Clopper-Pearson lower confidence bound: the largest p such
/// that P(X >= k) = alpha for X ~ Binomial(n, p). Returns 0 when k == 0 and
/// alpha^(1/n) when k == n. Throws std::invalid_argument on bad arguments.
double clopper_pearson_lower(std::int64_t k, std::int64_t n, double alpha);

/// Exact two-sided binomial test p-value under Binomial(n, 1/2):
/// min(1, 2 * min(P(X <= k), P(X >= k))). Tails are summed in log space.
double binom_two_sided_p(std::int64_t k, std::int64_t n);

/// log P(X >= k) for X ~ Binomial(n, 1/2), summed in log space.
double log_binom_upper_tail_half(std::int64_t k, std::int64_t n);

/// log P(X <= k) for X ~ Binomial(n, 1/2).
double log_binom_lower_tail_half(std::int64_t k, std::int64_t n);

}  // namespace certmark::stats
