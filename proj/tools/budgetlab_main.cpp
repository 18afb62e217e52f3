#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "budgetlab/envmodel.hpp"
#include "budgetlab/grpo.hpp"
#include "budgetlab/harness.hpp"
#include "budgetlab/oracle.hpp"

using namespace budgetlab;

namespace {

GenSpec gen_spec_from(int periods, double budget, const std::string& family) {
    GenSpec spec;
    spec.periods = periods;
    spec.budget = budget;
    if (family == "poly")
        spec.family = CurveFamily::Polynomial;
    else if (family == "exp")
        spec.family = CurveFamily::Exponential;
    else if (family == "mixed")
        spec.family = CurveFamily::Mixed;
    else
        throw CLI::ValidationError("--family must be poly, exp or mixed");
    return spec;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string token;
    while (std::getline(ss, token, ',')) out.push_back(std::stoi(token));
    return out;
}

void print_summary(const std::vector<EpisodeSummary>& summary) {
    std::printf("%-8s %-14s %-26s %-12s\n", "episode", "var_mean", "var_95ci", "mean_reward");
    for (const auto& s : summary) {
        if (s.variance.n > 1)
            std::printf("%-8d %-14.6g [%.6g, %.6g]      %-12.6g\n", s.episode_index,
                        s.variance.mean, s.variance.lo, s.variance.hi, s.mean_reward);
        else
            std::printf("%-8d %-14.6g (ci n/a, 1 repeat)        %-12.6g\n", s.episode_index,
                        s.variance.mean, s.mean_reward);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"budget allocation lab: environments, oracle solvers, dual-phase agents, "
                 "GRPO-Adaptive training and experiment harness"};
    app.require_subcommand(1);

    // --- env ---------------------------------------------------------------
    auto* env_cmd = app.add_subcommand("env", "generate, validate or rewrite environment files");
    env_cmd->require_subcommand(1);

    std::uint64_t gen_seed = 1;
    int gen_periods = 6;
    double gen_budget = 6.0;
    std::string gen_family = "poly";
    std::string gen_out;
    auto* env_gen = env_cmd->add_subcommand("gen", "generate an environment from a seed");
    env_gen->add_option("--seed", gen_seed, "generation seed");
    env_gen->add_option("--periods", gen_periods, "number of periods T");
    env_gen->add_option("--budget", gen_budget, "total budget B");
    env_gen->add_option("--family", gen_family, "curve family: poly|exp|mixed");
    env_gen->add_option("--out", gen_out, "output file (stdout when omitted)");

    std::string validate_path;
    auto* env_validate = env_cmd->add_subcommand("validate", "check an environment file");
    env_validate->add_option("path", validate_path, "environment file")->required();

    std::string save_in, save_out;
    auto* env_save_cmd = env_cmd->add_subcommand("save", "load, validate and re-emit a file");
    env_save_cmd->add_option("--in", save_in, "input environment file")->required();
    env_save_cmd->add_option("--out", save_out, "output environment file")->required();

    // --- solve ---------------------------------------------------------------
    auto* solve_cmd = app.add_subcommand("solve", "equal-marginal oracle with grid cross-check");
    std::string solve_env_path;
    std::uint64_t solve_seed = 1;
    int solve_periods = 6;
    double solve_budget = 6.0;
    std::string solve_family = "poly";
    double solve_step = 0.02;
    bool skip_grid = false;
    solve_cmd->add_option("--env", solve_env_path, "environment file (generated when omitted)");
    solve_cmd->add_option("--seed", solve_seed, "generation seed");
    solve_cmd->add_option("--periods", solve_periods, "periods for generation");
    solve_cmd->add_option("--budget", solve_budget, "budget for generation");
    solve_cmd->add_option("--family", solve_family, "curve family for generation");
    solve_cmd->add_option("--step", solve_step, "grid step for the brute-force cross-check");
    solve_cmd->add_flag("--skip-bruteforce", skip_grid, "skip the grid cross-check");

    // --- run / train ---------------------------------------------------------
    auto* run_cmd = app.add_subcommand("run", "dual-phase experiment from a config file");
    std::string run_config, run_out;
    bool run_overwrite = false;
    run_cmd->add_option("--config", run_config, "experiment config (json)")->required();
    run_cmd->add_option("--out", run_out, "output directory (overrides config)");
    run_cmd->add_flag("--overwrite", run_overwrite, "replace existing metric files");

    auto* train_cmd = app.add_subcommand("train", "GRPO-Adaptive training run");
    std::string train_config, train_out;
    std::uint64_t train_seed = 0;
    bool train_seed_set = false;
    train_cmd->add_option("--config", train_config, "experiment config (json)")->required();
    train_cmd->add_option("--out", train_out, "output directory (overrides config)");
    train_cmd->add_option("--seed", train_seed, "training seed (overrides config)")
        ->each([&](const std::string&) { train_seed_set = true; });

    // --- sweeps ----------------------------------------------------------------
    auto* sweep_cmd = app.add_subcommand("sweep", "parameter sweeps");
    sweep_cmd->require_subcommand(1);

    auto* sweep_periods = sweep_cmd->add_subcommand("periods", "vary the period count");
    std::string sp_config, sp_list = "2,4,6,8,10";
    sweep_periods->add_option("--config", sp_config, "experiment config (json)")->required();
    sweep_periods->add_option("--list", sp_list, "comma-separated period counts");

    auto* sweep_refresh = sweep_cmd->add_subcommand("refresh", "vary the reference refresh");
    std::string sr_config, sr_list = "60";
    bool sr_no_static = false, sr_no_beta0 = false;
    sweep_refresh->add_option("--config", sr_config, "experiment config (json)")->required();
    sweep_refresh->add_option("--list", sr_list, "comma-separated refresh periods M");
    sweep_refresh->add_flag("--no-static", sr_no_static, "drop the static-reference arm");
    sweep_refresh->add_flag("--no-beta0", sr_no_beta0, "drop the beta=0 arm");

    // --- report ------------------------------------------------------------------
    auto* report_cmd = app.add_subcommand("report", "recompute summaries from persisted rows");
    std::string report_dir;
    report_cmd->add_option("--dir", report_dir, "experiment output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (env_gen->parsed()) {
            const Environment env = env_generate(gen_seed, gen_spec_from(gen_periods, gen_budget, gen_family));
            if (gen_out.empty())
                std::cout << env_to_text(env);
            else {
                env_save(env, gen_out);
                std::printf("wrote %s (T=%d, B=%g)\n", gen_out.c_str(), env.periods(), env.budget);
            }
        } else if (env_validate->parsed()) {
            const Environment env = env_load(validate_path);
            std::printf("%s: valid (T=%d, B=%g)\n", validate_path.c_str(), env.periods(),
                        env.budget);
        } else if (env_save_cmd->parsed()) {
            env_save(env_load(save_in), save_out);
            std::printf("rewrote %s -> %s\n", save_in.c_str(), save_out.c_str());
        } else if (solve_cmd->parsed()) {
            const Environment env =
                solve_env_path.empty()
                    ? env_generate(solve_seed,
                                   gen_spec_from(solve_periods, solve_budget, solve_family))
                    : env_load(solve_env_path);
            const OracleResult res = solve_equal_marginal(env);
            std::printf("equal-marginal solution (lambda=%.10g, residual=%.3g, %d iterations)\n",
                        res.common_marginal, res.residual, res.iterations);
            for (int t = 0; t < env.periods(); ++t)
                std::printf("  period %d: %.6f\n", t, res.allocation.values[t]);
            const double oracle_var = mroi_variance(env_evaluate(env, res.allocation.values));
            std::printf("mroi variance: %.10g\n", oracle_var);
            if (!skip_grid) {
                const Allocation grid = solve_bruteforce(env, solve_step);
                const double grid_var = mroi_variance(env_evaluate(env, grid.values));
                std::printf("grid cross-check (step %g): variance %.10g, gap %.3g\n", solve_step,
                            grid_var, oracle_var - grid_var);
            }
        } else if (run_cmd->parsed()) {
            ExperimentConfig cfg = load_experiment_config(run_config);
            if (!run_out.empty()) cfg.out_dir = run_out;
            if (run_overwrite) cfg.overwrite = true;
            const ExperimentResult res = run_experiment(cfg);
            print_summary(res.summary);
            if (!cfg.out_dir.empty())
                std::printf("metrics written to %s\n", cfg.out_dir.c_str());
        } else if (train_cmd->parsed()) {
            ExperimentConfig cfg = load_experiment_config(train_config);
            if (!train_out.empty()) cfg.out_dir = train_out;
            const std::uint64_t seed = train_seed_set ? train_seed : cfg.seed;
            GenSpec spec = cfg.env.gen_spec;
            const TrainResult res = train(cfg.grpo, spec, cfg.reward, seed);
            double tail = 0.0;
            const int tail_n = std::min<int>(50, res.log.size());
            for (int i = static_cast<int>(res.log.size()) - tail_n;
                 i < static_cast<int>(res.log.size()); ++i)
                tail += res.log[i].best_variance;
            std::printf("trained %zu iterations; final-%d mean best variance %.6g\n",
                        res.log.size(), tail_n, tail / std::max(1, tail_n));
            if (!cfg.out_dir.empty()) {
                std::filesystem::create_directories(cfg.out_dir);
                write_train_log_csv(cfg.out_dir + "/training_log.csv", res.log);
                save_policy(res.policy, cfg.out_dir + "/policy.json");
                std::printf("training log and checkpoint written to %s\n", cfg.out_dir.c_str());
            }
        } else if (sweep_periods->parsed()) {
            const ExperimentConfig cfg = load_experiment_config(sp_config);
            const auto rows = run_period_sweep(cfg, parse_int_list(sp_list));
            std::printf("%-8s %-16s %-16s\n", "T", "final_var_mean", "uniform_var");
            for (const auto& r : rows)
                std::printf("%-8d %-16.6g %-16.6g\n", r.periods, r.final_variance.mean,
                            r.uniform_mean_variance);
        } else if (sweep_refresh->parsed()) {
            const ExperimentConfig cfg = load_experiment_config(sr_config);
            const RefreshSweepResult res =
                run_refresh_sweep(cfg, parse_int_list(sr_list), !sr_no_static, !sr_no_beta0);
            std::printf("%-10s %-22s %-16s\n", "arm", "seed", "final_window_var");
            for (const auto& r : res.results)
                std::printf("%-10s %-22llu %-16.6g\n", r.arm.c_str(),
                            static_cast<unsigned long long>(r.seed),
                            r.final_window_mean_variance);
            if (!res.diagnostic.empty()) std::printf("note: %s\n", res.diagnostic.c_str());
        } else if (report_cmd->parsed()) {
            print_summary(report_from_dir(report_dir));
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
