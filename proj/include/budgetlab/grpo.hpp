#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "budgetlab/agents.hpp"
#include "budgetlab/envmodel.hpp"
#include "budgetlab/reward.hpp"
#include "budgetlab/rng.hpp"

namespace budgetlab {

// Stochastic allocation policy over the budget simplex. A window summary is
// mapped to per-period features, shared linear weights produce a length-T
// latent mean, and actions are B * softmax(z) for a Gaussian latent z, so
// every sampled action is feasible by construction.
//
// Zero weights give the uniform allocation. Softmax inverts the log-relative
// allocation feature, so a unit weight on it replicates the window's latest
// allocation; learning that weight plus the deviation tilt is what turns the
// policy into a feedback-driven allocator.
struct SimplexPolicy {
    static constexpr int kFeatureCount = 3;

    std::string feature_map = "window-summary-v1";
    int periods = 0;
    std::vector<double> mean_weights;  // kFeatureCount, shared across periods
    std::vector<double> log_std;       // length periods

    static SimplexPolicy initial(int periods, double sigma = 0.3);

    // per-period features: [mean reward, last allocation - B/T, normalized deviation]
    double feature(const WindowSummary& s, double budget, int t, int f) const;
    std::vector<double> latent_mean(const WindowSummary& s, double budget) const;

    struct Draw {
        std::vector<double> latent;
        std::vector<double> action;
    };
    Draw sample(const WindowSummary& s, double budget, Rng& rng) const;

    std::vector<double> action_from_latent(std::span<const double> latent, double budget) const;
    double log_density(const WindowSummary& s, double budget,
                       std::span<const double> latent) const;
};

void save_policy(const SimplexPolicy& policy, const std::string& path);
SimplexPolicy load_policy(const std::string& path);

struct GrpoConfig {
    int group_size = 3;       // G
    double clip_eps = 0.1;    // epsilon
    double kl_beta = 0.04;    // beta
    double lr = 3e-4;         // desk-scale default for the compact policy; LLM-scale 5e-6 stays configurable
    int iterations = 500;     // N
    int refresh_period = 60;  // M; 0 disables the reference refresh
    int batch_prompts = 8;    // recent-state buffer used for the KL term
    double gamma = 1.0;       // within-environment discount (undiscounted default)
    int tries_per_env = 10;   // S: environment switch period
    double pref_scale = 1.0;  // multiplier on the advantage term
    int window_capacity = 3;  // w for the live training window
    double sigma_init = 0.05;

    void validate() const;
};

struct TrainerState {
    SimplexPolicy policy;
    SimplexPolicy policy_old;  // snapshot used for ratios, refreshed every step
    SimplexPolicy reference;   // KL anchor, refreshed every refresh_period steps
    long iteration = 0;
    GrpoConfig cfg;
    std::vector<WindowSummary> recent_states;  // capped at cfg.batch_prompts

    static TrainerState initial(const GrpoConfig& cfg, int periods);
};

// (r_i - mean) / population std; all zeros when the spread is degenerate
std::vector<double> group_advantages(std::span<const double> rewards);

// min(ratio * adv, clip(ratio, 1-eps, 1+eps) * adv)
double clipped_surrogate(double ratio, double advantage, double eps);

// Mean over the state batch of the closed-form KL between the two diagonal
// latent Gaussians.
double kl_to_reference(const SimplexPolicy& policy, const SimplexPolicy& reference,
                       std::span<const WindowSummary> states, double budget);

struct PolicyGrad {
    std::vector<double> mean_weights;
    std::vector<double> log_std;
};

// Full training loss L = -pref_scale * L_adv + beta * KL as a function of
// `policy`, with sampled latents and their advantages fixed. Exposed so the
// analytic gradient can be checked against finite differences.
double grpo_loss(const SimplexPolicy& policy, const SimplexPolicy& policy_old,
                 const SimplexPolicy& reference, const WindowSummary& state, double budget,
                 std::span<const std::vector<double>> latents, std::span<const double> advantages,
                 std::span<const WindowSummary> kl_states, const GrpoConfig& cfg);

PolicyGrad grpo_loss_gradient(const SimplexPolicy& policy, const SimplexPolicy& policy_old,
                              const SimplexPolicy& reference, const WindowSummary& state,
                              double budget, std::span<const std::vector<double>> latents,
                              std::span<const double> advantages,
                              std::span<const WindowSummary> kl_states, const GrpoConfig& cfg);

struct GrpoStepResult {
    EpisodeRecord best;
    double mean_reward = 0.0;
    double best_reward = 0.0;
    double kl_value = 0.0;
    bool refreshed = false;
    bool any_feasible = true;
};

// One GRPO iteration: sample G actions from the old policy on the window
// summary, score them, take a gradient step, refresh the reference when due,
// and return the best-scoring record. Group member i draws from an RNG
// stream derived from (step_seed, i), so parallel and serial rollout
// evaluation produce identical results.
GrpoStepResult grpo_step(TrainerState& state, const SlidingWindow& window,
                         const Environment& env, const EpisodeRecord* last_record,
                         const RewardConfig& reward_cfg, std::uint64_t step_seed);

struct TrainLogRow {
    int iteration = 0;
    std::uint64_t env_seed = 0;
    double mean_reward = 0.0;
    double best_reward = 0.0;
    double best_variance = 0.0;
    double kl_value = 0.0;
    int refreshed = 0;
};

struct TrainResult {
    SimplexPolicy policy;
    std::vector<TrainLogRow> log;
};

// Multi-environment schedule: every tries_per_env iterations the environment
// is regenerated from a seed derived of (seed, environment index), the live
// window is reseeded with scored random few-shot records, and each step's
// best record is appended to the window. Fully deterministic in `seed`.
TrainResult train(const GrpoConfig& cfg, const GenSpec& gen_spec, RewardConfig reward_cfg,
                  std::uint64_t seed);

// Agent-interface wrapper for a trained policy.
class PolicyAgent final : public Agent {
public:
    PolicyAgent(SimplexPolicy policy, std::uint64_t seed);

    std::vector<double> act(std::span<const EpisodeRecord> history, const EnvMeta& meta) override;
    std::unique_ptr<Agent> clone_for_run(std::uint64_t run_seed) const override;
    std::string name() const override { return "policy"; }

private:
    SimplexPolicy policy_;
    std::uint64_t seed_;
    Rng rng_;
};

}  // namespace budgetlab
