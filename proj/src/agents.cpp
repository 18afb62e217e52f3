#include "budgetlab/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace budgetlab {

namespace {
constexpr double kGrandMeanFloor = 1e-6;
}

FewShotSet FewShotSet::of(std::vector<EpisodeRecord> records) {
    if (records.empty()) throw std::invalid_argument("few-shot set must be non-empty");
    const std::size_t T = records.front().allocation.size();
    for (const auto& r : records) {
        if (r.allocation.size() != T || r.mroi.size() != T)
            throw std::invalid_argument("few-shot records must share the same period count");
        for (double m : r.mroi)
            if (m < 0.0) throw std::invalid_argument("few-shot mroi entries must be nonnegative");
    }
    FewShotSet set;
    set.records = std::move(records);
    return set;
}

SlidingWindow::SlidingWindow(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("sliding window capacity must be >= 1");
}

void SlidingWindow::push(EpisodeRecord record) {
    if (static_cast<int>(records_.size()) == capacity_) records_.erase(records_.begin());
    records_.push_back(std::move(record));
}

const EpisodeRecord& SlidingWindow::latest() const {
    if (records_.empty()) throw std::logic_error("sliding window is empty");
    return records_.back();
}

std::vector<double> project_to_budget(std::vector<double> values, double budget) {
    double sum = 0.0;
    for (double& v : values) {
        if (v < 0.0) v = 0.0;
        sum += v;
    }
    if (sum <= 0.0) {
        const double uniform = budget / static_cast<double>(values.size());
        std::fill(values.begin(), values.end(), uniform);
        return values;
    }
    const double scale = budget / sum;
    for (double& v : values) v *= scale;
    return values;
}

std::vector<double> reasoner_heuristic(std::span<const EpisodeRecord> fewshot,
                                       const EnvMeta& meta, double eta) {
    if (fewshot.empty()) throw std::invalid_argument("reasoner: few-shot history is empty");
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("reasoner: eta must be in (0,1)");
    const EpisodeRecord& last = fewshot.back();
    if (static_cast<int>(last.allocation.size()) != meta.periods ||
        static_cast<int>(last.mroi.size()) != meta.periods)
        throw std::invalid_argument("reasoner: latest record does not match the period count");

    int i_low = 0, i_high = 0;
    for (int t = 1; t < meta.periods; ++t) {
        if (last.mroi[t] < last.mroi[i_low]) i_low = t;
        if (last.mroi[t] > last.mroi[i_high]) i_high = t;
    }
    std::vector<double> out = last.allocation;
    if (last.mroi[i_low] == last.mroi[i_high]) return out;  // no signal

    const double transfer = eta * out[i_low];
    out[i_low] -= transfer;
    out[i_high] += transfer;
    return project_to_budget(std::move(out), meta.budget);
}

WindowSummary summarize_window(std::span<const EpisodeRecord> records, const EnvMeta& meta) {
    WindowSummary s;
    const int T = meta.periods;
    s.mean_reward.assign(T, 0.0);
    s.last_allocation.assign(T, 0.0);
    s.deviation.assign(T, 0.0);
    for (const auto& r : records) {
        if (static_cast<int>(r.allocation.size()) != T || static_cast<int>(r.mroi.size()) != T)
            continue;
        for (int t = 0; t < T; ++t) s.mean_reward[t] += r.mroi[t];
        s.last_allocation = r.allocation;
        ++s.valid_records;
    }
    if (s.valid_records == 0) {
        std::fill(s.last_allocation.begin(), s.last_allocation.end(),
                  meta.budget / static_cast<double>(T));
        return s;
    }
    for (int t = 0; t < T; ++t) s.mean_reward[t] /= static_cast<double>(s.valid_records);
    for (int t = 0; t < T; ++t) s.grand_mean += s.mean_reward[t];
    s.grand_mean /= static_cast<double>(T);
    for (int t = 0; t < T; ++t)
        s.deviation[t] = (s.mean_reward[t] - s.grand_mean) / std::max(s.grand_mean, kGrandMeanFloor);
    return s;
}

std::vector<double> optimizer_heuristic(std::span<const EpisodeRecord> window,
                                        const EnvMeta& meta, double step_gain) {
    if (window.empty()) throw std::invalid_argument("optimizer: window is empty");
    const WindowSummary s = summarize_window(window, meta);
    if (s.valid_records == 0)
        return std::vector<double>(meta.periods, meta.budget / meta.periods);

    std::vector<double> out = s.last_allocation;
    for (int t = 0; t < meta.periods; ++t)
        out[t] = std::max(0.0, out[t] + step_gain * meta.budget * s.deviation[t]);
    return project_to_budget(std::move(out), meta.budget);
}

std::vector<double> ReasonerHeuristicAgent::act(std::span<const EpisodeRecord> history,
                                                const EnvMeta& meta) {
    return reasoner_heuristic(history, meta, eta_);
}

std::unique_ptr<Agent> ReasonerHeuristicAgent::clone_for_run(std::uint64_t) const {
    return std::make_unique<ReasonerHeuristicAgent>(eta_);
}

std::vector<double> OptimizerHeuristicAgent::act(std::span<const EpisodeRecord> history,
                                                 const EnvMeta& meta) {
    return optimizer_heuristic(history, meta, step_gain_);
}

std::unique_ptr<Agent> OptimizerHeuristicAgent::clone_for_run(std::uint64_t) const {
    return std::make_unique<OptimizerHeuristicAgent>(step_gain_);
}

EpisodeRecord score_episode(const Environment& env, std::vector<double> raw_alloc) {
    EpisodeRecord rec;
    if (static_cast<int>(raw_alloc.size()) == env.periods()) {
        std::vector<double> clamped = raw_alloc;
        for (double& v : clamped) v = std::clamp(v, 0.0, env.budget);
        rec.mroi = env_evaluate(env, clamped);
    } else {
        rec.mroi.assign(raw_alloc.size(), 0.0);  // environment cannot respond
    }
    rec.allocation = std::move(raw_alloc);
    return rec;
}

Trajectory run_dual_phase(const Environment& env, const FewShotSet& fewshot, Agent& reasoner,
                          Agent& optimizer, int window_capacity, int n_try,
                          const std::string& env_id) {
    if (n_try < 1) throw std::invalid_argument("run_dual_phase: n_try must be >= 1");
    const EnvMeta meta{env.periods(), env.budget};

    Trajectory traj;
    traj.env_id = env_id;
    traj.episodes.reserve(n_try);

    EpisodeRecord first = score_episode(env, reasoner.act(fewshot.records, meta));
    traj.episodes.push_back(first);

    SlidingWindow window(window_capacity);
    const int tail = std::min<int>(window_capacity - 1, static_cast<int>(fewshot.records.size()));
    for (int i = static_cast<int>(fewshot.records.size()) - tail;
         i < static_cast<int>(fewshot.records.size()); ++i)
        window.push(fewshot.records[i]);
    window.push(std::move(first));

    for (int s = 2; s <= n_try; ++s) {
        EpisodeRecord rec = score_episode(env, optimizer.act(window.records(), meta));
        traj.episodes.push_back(rec);
        window.push(std::move(rec));
    }
    return traj;
}

}  // namespace budgetlab
