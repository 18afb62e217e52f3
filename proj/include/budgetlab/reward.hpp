#pragma once

#include <span>
#include <utility>
#include <vector>

#include "budgetlab/envmodel.hpp"

namespace budgetlab {

struct RewardConfig {
    double alpha = 0.5;        // dispersion scaling
    double big_penalty = 100;  // dimension-mismatch penalty M
    double delta = 0.2;        // minimum adjustment threshold
    double tau = 0.2;          // per-period bonus clipping bound
    double budget = 6.0;
    int periods = 6;
};

struct RewardBreakdown {
    double env = 0.0;
    double constraint = 0.0;
    double bonus = 0.0;
    double total = 0.0;
};

// -alpha * sum_i |r_i - mean(r)|; 0 iff all entries equal
double reward_env(std::span<const double> mroi, const RewardConfig& cfg);

// -M on a dimension mismatch, otherwise -|sum - B|
double reward_constraint(std::span<const double> raw_alloc, const RewardConfig& cfg);

// Movement bonus against the previous allocation: periods in `hi` earn
// min(|b-c|, tau) when raised past c+delta, periods in `lo` earn it when cut
// below c-delta while staying positive. The sets must be disjoint.
double reward_bonus(std::span<const double> alloc, std::span<const double> last_alloc,
                    std::span<const int> hi, std::span<const int> lo, const RewardConfig& cfg);

// Mean-split of the previous episode's marginal ROI: periods strictly above
// the mean land in the first set, strictly below in the second.
std::pair<std::vector<int>, std::vector<int>> derive_adjustment_sets(
    std::span<const double> last_mroi);

// Composite reward for a raw agent output. The constraint term is always
// scored; the env term only when the dimension is right (entries are clamped
// to [0, B] so the environment can respond, the sum error stays with the
// constraint term); the bonus only when a previous episode is available.
RewardBreakdown reward_total(std::span<const double> raw_alloc, const Environment& env,
                             const EpisodeRecord* last_record, const RewardConfig& cfg);

// Same composite but with a precomputed marginal-ROI response.
RewardBreakdown reward_total_from_mroi(std::span<const double> raw_alloc,
                                       std::span<const double> mroi,
                                       const EpisodeRecord* last_record, const RewardConfig& cfg);

}  // namespace budgetlab
