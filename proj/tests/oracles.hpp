#pragma once

// Test-only oracles, deliberately implemented along different routes than
// the library code they check.

#include <cstdint>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace oracle {

using boost::multiprecision::cpp_int;

// Row K of Pascal's triangle built purely by additions (the library's
// threshold search uses the multiplicative formula instead).
std::vector<cpp_int> pascal_row(std::uint32_t k);

// Minimal tau with P(Bin(K,1/2) >= tau) <= fpr, scanning the Pascal row
// with exact dyadic-rational comparison.
std::uint32_t threshold_from_pascal(std::uint32_t k, double fpr);

// P(Bin(K,1/2) >= tau) as a long double (for magnitude checks only).
long double binomial_half_tail_ge(std::uint32_t k, std::uint32_t tau);

// Exact tail P(sum of independent Bernoulli(probs_i) >= threshold), dynamic
// programming over the count distribution.
double poisson_binomial_tail_ge(std::span<const double> probs, std::uint32_t threshold);

// Error probability of a group-sum sign decode when each element is negated
// independently: true bit 1 decodes wrongly when the flipped sum drops below
// zero, bit 0 when it stays non-negative. Normal approximation from the
// exact mean/variance of the flipped sum.
double group_flip_error_normal(std::span<const double> values,
                               std::span<const double> flip_probs, bool true_bit_is_one);

// Minimal possible spread (max group sum - min group sum) over all ways of
// splitting `values` into `group_count` equal-size groups. Exponential
// search with symmetry pruning; intended for n <= 12.
double brute_force_min_spread(std::span<const double> values, std::size_t group_count);

// Same, but restricted to the pairing the codec uses (i-th smallest with
// i-th largest); enumerates all assignments of pairs to groups. For inputs
// up to ~8 pairs.
double pairwise_min_spread(std::span<const double> sorted_values, std::size_t group_count);

} // namespace oracle
