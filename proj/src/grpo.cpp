#include "budgetlab/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "budgetlab/oracle.hpp"
#include "json.hpp"

namespace budgetlab {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kAdvSigmaFloor = 1e-8;
}  // namespace

SimplexPolicy SimplexPolicy::initial(int periods, double sigma) {
    if (periods < 2) throw std::invalid_argument("SimplexPolicy: periods must be >= 2");
    if (!(sigma > 0.0)) throw std::invalid_argument("SimplexPolicy: sigma must be positive");
    SimplexPolicy p;
    p.periods = periods;
    p.mean_weights.assign(kFeatureCount, 0.0);
    p.log_std.assign(periods, std::log(sigma));
    return p;
}

double SimplexPolicy::feature(const WindowSummary& s, double budget, int t, int f) const {
    const double uniform = budget / periods;
    switch (f) {
        case 0: {
            // log-relative last allocation: softmax inverts the log, so a
            // unit weight reproduces the window's latest allocation exactly;
            // clamped so extreme allocations cannot self-amplify through the
            // policy's own feedback loop
            const double c = std::max(s.last_allocation[t], 1e-3 * uniform);
            return std::clamp(std::log(c / uniform), -2.0, 2.0);
        }
        case 1:
            // normalized deviation explodes when the grand mean nears zero;
            // clamped so one weight unit stays a moderate softmax tilt
            return std::clamp(s.deviation[t], -2.0, 2.0);
        case 2:
            return s.mean_reward[t] - s.grand_mean;
    }
    throw std::logic_error("SimplexPolicy: bad feature index");
}

std::vector<double> SimplexPolicy::latent_mean(const WindowSummary& s, double budget) const {
    std::vector<double> mu(periods, 0.0);
    for (int t = 0; t < periods; ++t)
        for (int f = 0; f < kFeatureCount; ++f) mu[t] += mean_weights[f] * feature(s, budget, t, f);
    return mu;
}

std::vector<double> SimplexPolicy::action_from_latent(std::span<const double> latent,
                                                      double budget) const {
    double zmax = latent[0];
    for (double z : latent) zmax = std::max(zmax, z);
    std::vector<double> action(latent.size());
    double sum = 0.0;
    for (std::size_t t = 0; t < latent.size(); ++t) {
        action[t] = std::exp(latent[t] - zmax);
        sum += action[t];
    }
    for (double& a : action) a = budget * a / sum;
    return action;
}

SimplexPolicy::Draw SimplexPolicy::sample(const WindowSummary& s, double budget, Rng& rng) const {
    const std::vector<double> mu = latent_mean(s, budget);
    Draw d;
    d.latent.resize(periods);
    for (int t = 0; t < periods; ++t) d.latent[t] = mu[t] + std::exp(log_std[t]) * rng.normal();
    d.action = action_from_latent(d.latent, budget);
    return d;
}

double SimplexPolicy::log_density(const WindowSummary& s, double budget,
                                  std::span<const double> latent) const {
    if (static_cast<int>(latent.size()) != periods)
        throw std::invalid_argument("log_density: latent length mismatch");
    const std::vector<double> mu = latent_mean(s, budget);
    double lp = 0.0;
    for (int t = 0; t < periods; ++t) {
        const double sigma = std::exp(log_std[t]);
        const double z = (latent[t] - mu[t]) / sigma;
        lp += -log_std[t] - 0.5 * kLog2Pi - 0.5 * z * z;
    }
    return lp;
}

void save_policy(const SimplexPolicy& policy, const std::string& path) {
    nlohmann::json j;
    j["feature_map"] = policy.feature_map;
    j["periods"] = policy.periods;
    j["mean_weights"] = policy.mean_weights;
    j["log_std"] = policy.log_std;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_policy: cannot open " + path);
    out << j.dump(2) << "\n";
}

SimplexPolicy load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_policy: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("load_policy: " + path + ": " + e.what());
    }
    SimplexPolicy p;
    p.feature_map = j.at("feature_map").get<std::string>();
    p.periods = j.at("periods").get<int>();
    p.mean_weights = j.at("mean_weights").get<std::vector<double>>();
    p.log_std = j.at("log_std").get<std::vector<double>>();
    if (p.feature_map != SimplexPolicy{}.feature_map)
        throw std::invalid_argument("load_policy: unknown feature map '" + p.feature_map + "'");
    if (static_cast<int>(p.mean_weights.size()) != SimplexPolicy::kFeatureCount ||
        static_cast<int>(p.log_std.size()) != p.periods)
        throw std::invalid_argument("load_policy: checkpoint shape mismatch");
    return p;
}

void GrpoConfig::validate() const {
    if (group_size < 2)
        throw std::invalid_argument("GrpoConfig: group_size must be >= 2 for advantages");
    if (!(clip_eps > 0.0 && clip_eps < 1.0))
        throw std::invalid_argument("GrpoConfig: clip_eps must be in (0,1)");
    if (kl_beta < 0.0) throw std::invalid_argument("GrpoConfig: kl_beta must be >= 0");
    if (refresh_period < 0)
        throw std::invalid_argument("GrpoConfig: refresh_period must be >= 0 (0 = off)");
    if (!(lr > 0.0)) throw std::invalid_argument("GrpoConfig: lr must be positive");
    if (iterations < 0) throw std::invalid_argument("GrpoConfig: iterations must be >= 0");
    if (tries_per_env < 1) throw std::invalid_argument("GrpoConfig: tries_per_env must be >= 1");
    if (batch_prompts < 1) throw std::invalid_argument("GrpoConfig: batch_prompts must be >= 1");
    if (window_capacity < 1)
        throw std::invalid_argument("GrpoConfig: window_capacity must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw std::invalid_argument("GrpoConfig: gamma must be in (0,1]");
}

TrainerState TrainerState::initial(const GrpoConfig& cfg, int periods) {
    cfg.validate();
    TrainerState st;
    st.policy = SimplexPolicy::initial(periods, cfg.sigma_init);
    st.policy_old = st.policy;
    st.reference = st.policy;
    st.iteration = 0;
    st.cfg = cfg;
    return st;
}

std::vector<double> group_advantages(std::span<const double> rewards) {
    if (rewards.size() < 2)
        throw std::invalid_argument("group_advantages: group size must be >= 2");
    const double n = static_cast<double>(rewards.size());
    double mu = 0.0;
    for (double r : rewards) mu += r;
    mu /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mu) * (r - mu);
    const double sigma = std::sqrt(var / n);
    std::vector<double> adv(rewards.size(), 0.0);
    if (sigma < kAdvSigmaFloor) return adv;
    for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mu) / sigma;
    return adv;
}

double clipped_surrogate(double ratio, double advantage, double eps) {
    if (!(ratio > 0.0))
        throw std::domain_error("clipped_surrogate: likelihood ratio must be positive");
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
    return std::min(ratio * advantage, clipped * advantage);
}

double kl_to_reference(const SimplexPolicy& policy, const SimplexPolicy& reference,
                       std::span<const WindowSummary> states, double budget) {
    if (policy.periods != reference.periods || policy.feature_map != reference.feature_map)
        throw std::invalid_argument("kl_to_reference: policies do not share shape");
    if (states.empty()) throw std::invalid_argument("kl_to_reference: empty state batch");
    double total = 0.0;
    for (const auto& s : states) {
        const std::vector<double> mu = policy.latent_mean(s, budget);
        const std::vector<double> mu_ref = reference.latent_mean(s, budget);
        for (int t = 0; t < policy.periods; ++t) {
            const double sigma = std::exp(policy.log_std[t]);
            const double sigma_ref = std::exp(reference.log_std[t]);
            const double dmu = mu[t] - mu_ref[t];
            total += (reference.log_std[t] - policy.log_std[t]) +
                     (sigma * sigma + dmu * dmu) / (2.0 * sigma_ref * sigma_ref) - 0.5;
        }
    }
    return total / static_cast<double>(states.size());
}

double grpo_loss(const SimplexPolicy& policy, const SimplexPolicy& policy_old,
                 const SimplexPolicy& reference, const WindowSummary& state, double budget,
                 std::span<const std::vector<double>> latents, std::span<const double> advantages,
                 std::span<const WindowSummary> kl_states, const GrpoConfig& cfg) {
    if (latents.size() != advantages.size())
        throw std::invalid_argument("grpo_loss: latents and advantages disagree");
    double l_adv = 0.0;
    for (std::size_t i = 0; i < latents.size(); ++i) {
        const double ratio = std::exp(policy.log_density(state, budget, latents[i]) -
                                      policy_old.log_density(state, budget, latents[i]));
        l_adv += clipped_surrogate(ratio, advantages[i], cfg.clip_eps);
    }
    l_adv /= static_cast<double>(latents.size());
    double kl = 0.0;
    if (cfg.kl_beta != 0.0) kl = kl_to_reference(policy, reference, kl_states, budget);
    return -cfg.pref_scale * l_adv + cfg.kl_beta * kl;
}

PolicyGrad grpo_loss_gradient(const SimplexPolicy& policy, const SimplexPolicy& policy_old,
                              const SimplexPolicy& reference, const WindowSummary& state,
                              double budget, std::span<const std::vector<double>> latents,
                              std::span<const double> advantages,
                              std::span<const WindowSummary> kl_states, const GrpoConfig& cfg) {
    const int T = policy.periods;
    PolicyGrad g;
    g.mean_weights.assign(SimplexPolicy::kFeatureCount, 0.0);
    g.log_std.assign(T, 0.0);

    // advantage term: d/dtheta min(rho*A, clip(rho)*A); the clipped branch
    // is flat in rho, so only unclipped samples contribute
    const std::vector<double> mu = policy.latent_mean(state, budget);
    const double G = static_cast<double>(latents.size());
    for (std::size_t i = 0; i < latents.size(); ++i) {
        const double ratio = std::exp(policy.log_density(state, budget, latents[i]) -
                                      policy_old.log_density(state, budget, latents[i]));
        const double adv = advantages[i];
        const double unclipped = ratio * adv;
        const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv;
        if (unclipped > clipped) continue;  // min picked the flat branch
        const double scale = -cfg.pref_scale * adv * ratio / G;
        for (int t = 0; t < T; ++t) {
            const double sigma = std::exp(policy.log_std[t]);
            const double zc = latents[i][t] - mu[t];
            const double dlp_dmu = zc / (sigma * sigma);
            for (int f = 0; f < SimplexPolicy::kFeatureCount; ++f)
                g.mean_weights[f] += scale * dlp_dmu * policy.feature(state, budget, t, f);
            g.log_std[t] += scale * (-1.0 + zc * zc / (sigma * sigma));
        }
    }

    // KL term against the reference, averaged over the state batch
    if (cfg.kl_beta != 0.0) {
        if (kl_states.empty()) throw std::invalid_argument("grpo_loss_gradient: empty KL batch");
        const double n = static_cast<double>(kl_states.size());
        for (const auto& s : kl_states) {
            const std::vector<double> mu_s = policy.latent_mean(s, budget);
            const std::vector<double> mu_ref = reference.latent_mean(s, budget);
            for (int t = 0; t < T; ++t) {
                const double sigma = std::exp(policy.log_std[t]);
                const double sigma_ref = std::exp(reference.log_std[t]);
                const double dkl_dmu = (mu_s[t] - mu_ref[t]) / (sigma_ref * sigma_ref);
                for (int f = 0; f < SimplexPolicy::kFeatureCount; ++f)
                    g.mean_weights[f] +=
                        cfg.kl_beta * dkl_dmu * policy.feature(s, budget, t, f) / n;
                g.log_std[t] +=
                    cfg.kl_beta * (-1.0 + sigma * sigma / (sigma_ref * sigma_ref)) / n;
            }
        }
    }
    return g;
}

GrpoStepResult grpo_step(TrainerState& state, const SlidingWindow& window,
                         const Environment& env, const EpisodeRecord* last_record,
                         const RewardConfig& reward_cfg, std::uint64_t step_seed) {
    if (window.empty()) throw std::invalid_argument("grpo_step: window must be non-empty");
    const GrpoConfig& cfg = state.cfg;
    const EnvMeta meta{env.periods(), env.budget};

    state.policy_old = state.policy;
    const WindowSummary summary = summarize_window(window.records(), meta);
    state.recent_states.push_back(summary);
    if (static_cast<int>(state.recent_states.size()) > cfg.batch_prompts)
        state.recent_states.erase(state.recent_states.begin());

    const int G = cfg.group_size;
    std::vector<std::vector<double>> latents(G), actions(G);
    std::vector<double> rewards(G);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < G; ++i) {
        Rng rng(derive_seed(step_seed, {static_cast<std::uint64_t>(i)}));
        SimplexPolicy::Draw draw = state.policy_old.sample(summary, env.budget, rng);
        rewards[i] = reward_total(draw.action, env, last_record, reward_cfg).total;
        latents[i] = std::move(draw.latent);
        actions[i] = std::move(draw.action);
    }

    const std::vector<double> advantages = group_advantages(rewards);
    const double kl_value =
        kl_to_reference(state.policy, state.reference, state.recent_states, env.budget);
    const PolicyGrad grad =
        grpo_loss_gradient(state.policy, state.policy_old, state.reference, summary, env.budget,
                           latents, advantages, state.recent_states, cfg);
    for (int f = 0; f < SimplexPolicy::kFeatureCount; ++f)
        state.policy.mean_weights[f] -= cfg.lr * grad.mean_weights[f];
    for (int t = 0; t < state.policy.periods; ++t) {
        state.policy.log_std[t] -= cfg.lr * grad.log_std[t];
        // box keeps 1/sigma^2 factors in the density and KL well conditioned
        state.policy.log_std[t] = std::clamp(state.policy.log_std[t], std::log(0.02), std::log(2.0));
    }

    state.iteration += 1;
    GrpoStepResult res;
    res.refreshed = cfg.refresh_period > 0 && state.iteration % cfg.refresh_period == 0;
    if (res.refreshed) state.reference = state.policy;

    // preferred output: best reward among feasible samples, first on ties
    int best = -1;
    bool best_feasible = false;
    for (int i = 0; i < G; ++i) {
        double sum = 0.0;
        for (double v : actions[i]) sum += v;
        const bool feasible = std::fabs(sum - env.budget) <= 1e-9;
        const bool better =
            best < 0 || (feasible && !best_feasible) ||
            (feasible == best_feasible && rewards[i] > rewards[best]);
        if (better) {
            best = i;
            best_feasible = feasible;
        }
    }
    res.any_feasible = best_feasible;
    res.best = score_episode(env, actions[best]);
    res.best_reward = rewards[best];
    res.mean_reward = 0.0;
    for (double r : rewards) res.mean_reward += r;
    res.mean_reward /= static_cast<double>(G);
    res.kl_value = kl_value;
    return res;
}

TrainResult train(const GrpoConfig& cfg, const GenSpec& gen_spec, RewardConfig reward_cfg,
                  std::uint64_t seed) {
    cfg.validate();
    reward_cfg.periods = gen_spec.periods;
    reward_cfg.budget = gen_spec.budget;

    TrainerState state = TrainerState::initial(cfg, gen_spec.periods);
    TrainResult out;
    out.log.reserve(cfg.iterations);

    Environment env;
    SlidingWindow window(cfg.window_capacity);
    std::uint64_t env_seed = 0;
    int current_env = -1;

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        const int env_index = (iter - 1) / cfg.tries_per_env;
        if (env_index != current_env) {
            current_env = env_index;
            env_seed = derive_seed(seed, {0x656e76u, static_cast<std::uint64_t>(env_index)});
            env = env_generate(env_seed, gen_spec);
            // cold-start probe: every environment opens from the same scored
            // uniform record, so training blocks are comparable across
            // environments (random few-shot sets are an evaluation concern)
            window = SlidingWindow(cfg.window_capacity);
            window.push(score_episode(
                env, std::vector<double>(gen_spec.periods,
                                         gen_spec.budget / gen_spec.periods)));
        }
        const std::uint64_t step_seed =
            derive_seed(seed, {0x73746570u, static_cast<std::uint64_t>(iter)});
        const EpisodeRecord last = window.latest();
        GrpoStepResult res = grpo_step(state, window, env, &last, reward_cfg, step_seed);
        window.push(res.best);

        TrainLogRow row;
        row.iteration = iter;
        row.env_seed = env_seed;
        row.mean_reward = res.mean_reward;
        row.best_reward = res.best_reward;
        row.best_variance = mroi_variance(res.best.mroi);
        row.kl_value = res.kl_value;
        row.refreshed = res.refreshed ? 1 : 0;
        out.log.push_back(row);
    }
    out.policy = state.policy;
    return out;
}

PolicyAgent::PolicyAgent(SimplexPolicy policy, std::uint64_t seed)
    : policy_(std::move(policy)), seed_(seed), rng_(seed) {}

std::vector<double> PolicyAgent::act(std::span<const EpisodeRecord> history,
                                     const EnvMeta& meta) {
    if (meta.periods != policy_.periods)
        throw std::invalid_argument("PolicyAgent: policy was trained for a different T");
    const WindowSummary summary = summarize_window(history, meta);
    return policy_.sample(summary, meta.budget, rng_).action;
}

std::unique_ptr<Agent> PolicyAgent::clone_for_run(std::uint64_t run_seed) const {
    return std::make_unique<PolicyAgent>(policy_, derive_seed(seed_, {run_seed}));
}

}  // namespace budgetlab
