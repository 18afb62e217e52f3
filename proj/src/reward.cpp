#include "budgetlab/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace budgetlab {

double reward_env(std::span<const double> mroi, const RewardConfig& cfg) {
    if (static_cast<int>(mroi.size()) != cfg.periods)
        throw std::invalid_argument("reward_env: mroi length does not match periods");
    double mean = 0.0, lo = mroi[0], hi = mroi[0];
    for (double r : mroi) {
        mean += r;
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    if (lo == hi) return 0.0;  // zero dispersion, exactly
    mean /= static_cast<double>(mroi.size());
    double dispersion = 0.0;
    for (double r : mroi) dispersion += std::fabs(r - mean);
    return -cfg.alpha * dispersion;
}

double reward_constraint(std::span<const double> raw_alloc, const RewardConfig& cfg) {
    if (static_cast<int>(raw_alloc.size()) != cfg.periods) return -cfg.big_penalty;
    double sum = 0.0;
    for (double v : raw_alloc) sum += v;
    return -std::fabs(sum - cfg.budget);
}

double reward_bonus(std::span<const double> alloc, std::span<const double> last_alloc,
                    std::span<const int> hi, std::span<const int> lo, const RewardConfig& cfg) {
    for (int i : hi)
        for (int j : lo)
            if (i == j)
                throw std::invalid_argument("reward_bonus: adjustment sets must be disjoint");
    const auto in_range = [&](int i) {
        return i >= 0 && i < static_cast<int>(alloc.size()) &&
               i < static_cast<int>(last_alloc.size());
    };
    double bonus = 0.0;
    for (int i : hi) {
        if (!in_range(i)) throw std::invalid_argument("reward_bonus: index out of range");
        if (alloc[i] > last_alloc[i] + cfg.delta)
            bonus += std::min(std::fabs(alloc[i] - last_alloc[i]), cfg.tau);
    }
    for (int i : lo) {
        if (!in_range(i)) throw std::invalid_argument("reward_bonus: index out of range");
        if (alloc[i] < last_alloc[i] - cfg.delta && alloc[i] > 0.0)
            bonus += std::min(std::fabs(alloc[i] - last_alloc[i]), cfg.tau);
    }
    return bonus;
}

std::pair<std::vector<int>, std::vector<int>> derive_adjustment_sets(
    std::span<const double> last_mroi) {
    std::vector<int> hi, lo;
    if (last_mroi.empty()) return {hi, lo};
    double mean = 0.0;
    for (double r : last_mroi) mean += r;
    mean /= static_cast<double>(last_mroi.size());
    for (int i = 0; i < static_cast<int>(last_mroi.size()); ++i) {
        if (last_mroi[i] > mean)
            hi.push_back(i);
        else if (last_mroi[i] < mean)
            lo.push_back(i);
    }
    return {hi, lo};
}

RewardBreakdown reward_total_from_mroi(std::span<const double> raw_alloc,
                                       std::span<const double> mroi,
                                       const EpisodeRecord* last_record,
                                       const RewardConfig& cfg) {
    RewardBreakdown out;
    out.constraint = reward_constraint(raw_alloc, cfg);
    const bool dim_ok = static_cast<int>(raw_alloc.size()) == cfg.periods;
    if (dim_ok) out.env = reward_env(mroi, cfg);
    if (dim_ok && last_record != nullptr &&
        static_cast<int>(last_record->allocation.size()) == cfg.periods &&
        static_cast<int>(last_record->mroi.size()) == cfg.periods) {
        const auto [hi, lo] = derive_adjustment_sets(last_record->mroi);
        out.bonus = reward_bonus(raw_alloc, last_record->allocation, hi, lo, cfg);
    }
    out.total = out.env + out.constraint + out.bonus;
    return out;
}

RewardBreakdown reward_total(std::span<const double> raw_alloc, const Environment& env,
                             const EpisodeRecord* last_record, const RewardConfig& cfg) {
    if (env.periods() != cfg.periods)
        throw std::invalid_argument("reward_total: environment and reward config disagree on T");
    const bool dim_ok = static_cast<int>(raw_alloc.size()) == cfg.periods;
    std::vector<double> mroi;
    if (dim_ok) {
        std::vector<double> clamped(raw_alloc.begin(), raw_alloc.end());
        for (double& v : clamped) v = std::clamp(v, 0.0, env.budget);
        mroi = env_evaluate(env, clamped);
    }
    return reward_total_from_mroi(raw_alloc, mroi, last_record, cfg);
}

}  // namespace budgetlab
