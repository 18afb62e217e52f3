#pragma once

#include <span>
#include <vector>

#include "budgetlab/envmodel.hpp"

namespace budgetlab {

struct OracleResult {
    Allocation allocation;
    double common_marginal = 0.0;  // the equalized marginal value (lambda)
    int iterations = 0;
    double residual = 0.0;  // |sum(allocation) - B|
};

// Per-period demand at a candidate marginal level: the budget at which each
// curve's value equals `level` (0 when the curve starts below the level,
// the zero-crossing cap when level == 0). Entries may be +inf for curves
// that never reach zero. Total demand is non-increasing in `level`.
std::vector<double> invert_marginal(const Environment& env, double level);

// Equalizes marginal ROI across periods by bisecting on the common marginal
// level. When even level 0 cannot absorb the budget, the surplus is spread
// uniformly over the zero-crossing caps and the common marginal is 0.
OracleResult solve_equal_marginal(const Environment& env);

// Exact minimizer of marginal-ROI variance over the discrete simplex of
// allocations in multiples of `step` summing to B. Ties broken by the
// lexicographically smallest vector. Rejects grids whose enumeration work
// would be unreasonably large (use a coarser step).
Allocation solve_bruteforce(const Environment& env, double step);

// Naive full enumeration over the same grid. Reference implementation for
// tests and benchmarks; only feasible for small grids.
Allocation solve_bruteforce_serial(const Environment& env, double step);

// Population variance (divide by T) of a marginal-ROI vector, T >= 2.
double mroi_variance(std::span<const double> mroi);

}  // namespace budgetlab
