#pragma once

#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "budgetlab/agents.hpp"
#include "budgetlab/envmodel.hpp"

namespace budgetlab {

enum class PromptKind { Reasoner, Optimizer };

// History lines are rendered as "Round k: allocation=[...], rewards=[...]"
// with fixed 4-decimal formatting.
std::string format_history(std::span<const EpisodeRecord> history);

// Renders the agent prompt for T periods and budget B over the given
// history. The rendered text has no unresolved placeholders and ends with
// the literal opening tag "<reason>". Throws on empty history.
std::string render_prompt(PromptKind kind, int periods, double budget,
                          std::span<const EpisodeRecord> history);

struct ParseOutcome {
    bool ok = false;
    std::vector<double> values;
    std::string failure_reason;  // "no_answer_block" | "no_vector"

    static ParseOutcome success(std::vector<double> values);
    static ParseOutcome failure(std::string reason);
};

// Extracts the allocation vector from a model response: the first
// <answer>...</answer> span, then the first bracketed comma-separated
// numeric vector inside it. Dimension is not enforced here; the reward
// penalizes mismatches. Failures are data, not exceptions.
ParseOutcome parse_answer(const std::string& response, int periods);

struct CompletionEndpoint {
    std::string base_url;          // e.g. http://127.0.0.1:8080
    std::string path = "/v1/completions";
    std::string model_name;
    double timeout_s = 30.0;
    int max_tokens = 500;
    double temperature = 0.0;
    int retries = 2;               // additional attempts after the first
    int backoff_ms = 250;
    int max_in_flight = 4;
    std::string auth_token_env_var;  // credential read from the environment
};

struct CompletionLogEntry {
    std::string prompt;
    std::string response;
    int status = 0;
};

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Stateless text-in/text-out completion client. Requests are idempotent;
// transient failures are retried with exponential backoff and a
// TransportError is thrown once retries are exhausted. Concurrent calls are
// limited to max_in_flight.
class LlmClient {
public:
    explicit LlmClient(CompletionEndpoint endpoint);
    ~LlmClient();

    std::string complete(const std::string& prompt);

    const CompletionEndpoint& endpoint() const { return endpoint_; }
    std::vector<CompletionLogEntry> log() const;

private:
    CompletionEndpoint endpoint_;
    mutable std::mutex log_mutex_;
    std::vector<CompletionLogEntry> log_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// One completion request per action: render, call, parse.
ParseOutcome llm_agent_act(LlmClient& client, PromptKind kind,
                           std::span<const EpisodeRecord> history, const EnvMeta& meta);

// Agent-interface wrapper over the LLM path. Parse failures return an empty
// vector (penalized downstream as a dimension mismatch); transport errors
// propagate as TransportError.
class LlmAgent final : public Agent {
public:
    LlmAgent(CompletionEndpoint endpoint, PromptKind kind);

    std::vector<double> act(std::span<const EpisodeRecord> history, const EnvMeta& meta) override;
    std::unique_ptr<Agent> clone_for_run(std::uint64_t run_seed) const override;
    std::string name() const override;

    const LlmClient& client() const { return *client_; }

private:
    CompletionEndpoint endpoint_;
    PromptKind kind_;
    std::unique_ptr<LlmClient> client_;
};

}  // namespace budgetlab
