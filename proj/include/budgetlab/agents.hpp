#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "budgetlab/envmodel.hpp"

namespace budgetlab {

struct EnvMeta {
    int periods = 0;
    double budget = 0.0;
};

// Few-shot history available before the first decision. All records share T.
struct FewShotSet {
    std::vector<EpisodeRecord> records;

    static FewShotSet of(std::vector<EpisodeRecord> records);
};

// Most recent episode records, oldest evicted past capacity.
class SlidingWindow {
public:
    explicit SlidingWindow(int capacity);

    void push(EpisodeRecord record);
    std::span<const EpisodeRecord> records() const { return records_; }
    const EpisodeRecord& latest() const;
    int capacity() const { return capacity_; }
    bool empty() const { return records_.empty(); }
    int size() const { return static_cast<int>(records_.size()); }

private:
    int capacity_;
    std::vector<EpisodeRecord> records_;
};

struct Trajectory {
    std::vector<EpisodeRecord> episodes;
    std::string env_id;
};

// The seam shared by heuristic, trained-policy and LLM-backed agents. Agents
// see only episode feedback (never curve parameters). `history` is the
// few-shot set for the first episode and the sliding window afterwards.
class Agent {
public:
    virtual ~Agent() = default;
    virtual std::vector<double> act(std::span<const EpisodeRecord> history,
                                    const EnvMeta& meta) = 0;
    // Fresh instance for a concurrent run; stateless agents return a copy.
    virtual std::unique_ptr<Agent> clone_for_run(std::uint64_t run_seed) const = 0;
    virtual std::string name() const = 0;
};

// Floors at zero then rescales multiplicatively to sum exactly to B.
// An all-zero vector falls back to the uniform allocation.
std::vector<double> project_to_budget(std::vector<double> values, double budget);

// Prompt-A semantics: move eta of the lowest-marginal period's budget to the
// highest-marginal period; no move when the marginals are all equal.
std::vector<double> reasoner_heuristic(std::span<const EpisodeRecord> fewshot,
                                       const EnvMeta& meta, double eta);

// Prompt-B semantics: nudge each period by its window-mean reward deviation
// from the grand mean, scaled by step_gain * B, then renormalize.
std::vector<double> optimizer_heuristic(std::span<const EpisodeRecord> window,
                                        const EnvMeta& meta, double step_gain);

class ReasonerHeuristicAgent final : public Agent {
public:
    explicit ReasonerHeuristicAgent(double eta = 0.25) : eta_(eta) {}
    std::vector<double> act(std::span<const EpisodeRecord> history, const EnvMeta& meta) override;
    std::unique_ptr<Agent> clone_for_run(std::uint64_t) const override;
    std::string name() const override { return "heuristic-reasoner"; }

private:
    double eta_;
};

class OptimizerHeuristicAgent final : public Agent {
public:
    explicit OptimizerHeuristicAgent(double step_gain = 0.1) : step_gain_(step_gain) {}
    std::vector<double> act(std::span<const EpisodeRecord> history, const EnvMeta& meta) override;
    std::unique_ptr<Agent> clone_for_run(std::uint64_t) const override;
    std::string name() const override { return "heuristic-optimizer"; }

private:
    double step_gain_;
};

// Per-period aggregates over a record span, used by the optimizer heuristic
// and as the trained policy's observation. Records whose length does not
// match T (malformed agent outputs kept for training) are skipped.
struct WindowSummary {
    std::vector<double> mean_reward;      // per-period mean marginal ROI
    double grand_mean = 0.0;
    std::vector<double> last_allocation;  // latest record with matching T
    std::vector<double> deviation;        // (mean_reward - grand_mean) / max(grand_mean, eps)
    int valid_records = 0;
};

WindowSummary summarize_window(std::span<const EpisodeRecord> records, const EnvMeta& meta);

// Scores a raw allocation against the environment the way the dual-phase
// loop records it: entries clamped to [0, B] when the dimension is right,
// an all-zero response of matching length otherwise.
EpisodeRecord score_episode(const Environment& env, std::vector<double> raw_alloc);

// Algorithm: episode 1 from the reasoner on the few-shot set; the window is
// seeded with the latest (w-1) few-shot records plus episode 1; episodes
// 2..n_try come from the optimizer on the current window. Malformed outputs
// are recorded as-is so training sees failures.
Trajectory run_dual_phase(const Environment& env, const FewShotSet& fewshot, Agent& reasoner,
                          Agent& optimizer, int window_capacity, int n_try,
                          const std::string& env_id = "");

}  // namespace budgetlab
