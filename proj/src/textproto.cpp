#include "budgetlab/textproto.hpp"

#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <semaphore>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace budgetlab {

namespace {

const char* kReasonerTemplate =
    "You are given a total budget of {TOTAL} to allocate across {NUM} time periods. "
    "Based on your last attempt, identify the time period with the **lowest reward**, "
    "and reallocate some of its budget to the time period with the **highest reward**. "
    "Keep the allocations for other periods unchanged.\n"
    "\n"
    "Last attempt: {HISTORY}\n"
    "\n"
    "Please output the new allocation:\n"
    "<reason>\n"
    "...\n"
    "</reason>\n"
    "<answer>\n"
    "[y1, y2, ..., y{NUM}]\n"
    "</answer>\n"
    "\n"
    "Your Response:\n"
    "<reason>";

const char* kOptimizerTemplate =
    "You are given a budget allocation task across {NUM} time periods. The total budget "
    "is {TOTAL}, and it must be fully used - no more, no less. In every time period, "
    "allocating more budget results in smaller reward. Your goal is to equalize the "
    "reward across all periods.\n"
    "\n"
    "You are provided with the last some rounds of allocations and observed rewards. "
    "Use this historical data to identify:\n"
    "- Which periods likely has lower reward, reduce allocation slightly.\n"
    "- Which periods likely has higher reward, increase allocation slightly.\n"
    "\n"
    "Do not resort to a naive and robust uniform allocation. Instead, carefully analyze "
    "the underlying patterns and allocate the budget based on the relationship between "
    "historical data and observed rewards.\n"
    "\n"
    "Last attempt: {HISTORY}\n"
    "\n"
    "Please output the new allocation:\n"
    "<reason>\n"
    "...\n"
    "</reason>\n"
    "<answer>\n"
    "[y1, y2, ..., y{NUM}]\n"
    "</answer>\n"
    "\n"
    "Your Response:\n"
    "<reason>";

std::string fmt4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

// compact number for prompt text: "6" rather than "6.000000"
std::string fmt_compact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    std::string s = buf;
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

void replace_all(std::string& text, const std::string& what, const std::string& with) {
    std::size_t pos = 0;
    while ((pos = text.find(what, pos)) != std::string::npos) {
        text.replace(pos, what.size(), with);
        pos += with.size();
    }
}

std::string join4(std::span<const double> xs) {
    std::ostringstream out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out << ", ";
        out << fmt4(xs[i]);
    }
    return out.str();
}

}  // namespace

std::string format_history(std::span<const EpisodeRecord> history) {
    std::ostringstream out;
    for (std::size_t i = 0; i < history.size(); ++i) {
        out << "\nRound " << (i + 1) << ": allocation=[" << join4(history[i].allocation)
            << "], rewards=[" << join4(history[i].mroi) << "]";
    }
    return out.str();
}

std::string render_prompt(PromptKind kind, int periods, double budget,
                          std::span<const EpisodeRecord> history) {
    if (history.empty())
        throw std::invalid_argument("render_prompt: history must contain at least one record");
    std::string text =
        kind == PromptKind::Reasoner ? kReasonerTemplate : kOptimizerTemplate;
    replace_all(text, "{NUM}", std::to_string(periods));
    replace_all(text, "{TOTAL}", fmt_compact(budget));
    replace_all(text, "{HISTORY}", format_history(history));
    return text;
}

ParseOutcome ParseOutcome::success(std::vector<double> values) {
    ParseOutcome o;
    o.ok = true;
    o.values = std::move(values);
    return o;
}

ParseOutcome ParseOutcome::failure(std::string reason) {
    ParseOutcome o;
    o.ok = false;
    o.failure_reason = std::move(reason);
    return o;
}

namespace {

bool parse_number(const std::string& token, double& out) {
    const char* begin = token.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end != '\0') {
        if (!std::isspace(static_cast<unsigned char>(*end))) return false;
        ++end;
    }
    return true;
}

// first bracketed comma-separated numeric vector inside `text`
bool extract_vector(const std::string& text, std::vector<double>& out) {
    std::size_t open = 0;
    while ((open = text.find('[', open)) != std::string::npos) {
        const std::size_t close = text.find(']', open + 1);
        if (close == std::string::npos) return false;
        const std::string body = text.substr(open + 1, close - open - 1);
        std::vector<double> values;
        bool ok = !body.empty();
        std::size_t start = 0;
        while (ok && start <= body.size()) {
            const std::size_t comma = body.find(',', start);
            const std::string token =
                body.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            double v = 0.0;
            if (!parse_number(token, v)) {
                ok = false;
                break;
            }
            values.push_back(v);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (ok && !values.empty()) {
            out = std::move(values);
            return true;
        }
        open = open + 1;
    }
    return false;
}

}  // namespace

ParseOutcome parse_answer(const std::string& response, int /*periods*/) {
    const std::size_t open = response.find("<answer>");
    if (open == std::string::npos) return ParseOutcome::failure("no_answer_block");
    const std::size_t close = response.find("</answer>", open);
    if (close == std::string::npos) return ParseOutcome::failure("no_answer_block");
    const std::string span = response.substr(open + 8, close - open - 8);
    std::vector<double> values;
    if (!extract_vector(span, values)) return ParseOutcome::failure("no_vector");
    return ParseOutcome::success(std::move(values));
}

// --- endpoint client ------------------------------------------------------

struct LlmClient::Impl {
    explicit Impl(int max_in_flight) : gate(std::max(1, max_in_flight)) {}
    std::counting_semaphore<256> gate;
};

LlmClient::LlmClient(CompletionEndpoint endpoint)
    : endpoint_(std::move(endpoint)), impl_(std::make_unique<Impl>(endpoint_.max_in_flight)) {
    if (endpoint_.base_url.empty())
        throw std::invalid_argument("LlmClient: endpoint base_url is required");
}

LlmClient::~LlmClient() = default;

std::vector<CompletionLogEntry> LlmClient::log() const {
    std::lock_guard<std::mutex> lock(log_mutex_);
    return log_;
}

namespace {

std::string extract_completion_text(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
            const auto& c = j["choices"][0];
            if (c.contains("text")) return c["text"].get<std::string>();
            if (c.contains("message") && c["message"].contains("content"))
                return c["message"]["content"].get<std::string>();
        }
        if (j.contains("text")) return j["text"].get<std::string>();
        if (j.contains("completion")) return j["completion"].get<std::string>();
    } catch (const nlohmann::json::parse_error&) {
        // plain-text endpoint; fall through to the raw body
    }
    return body;
}

}  // namespace

std::string LlmClient::complete(const std::string& prompt) {
    impl_->gate.acquire();
    struct Release {
        std::counting_semaphore<256>& gate;
        ~Release() { gate.release(); }
    } release{impl_->gate};

    nlohmann::json req;
    req["model"] = endpoint_.model_name;
    req["prompt"] = prompt;
    req["max_tokens"] = endpoint_.max_tokens;
    req["temperature"] = endpoint_.temperature;
    const std::string body = req.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= endpoint_.retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(endpoint_.backoff_ms << (attempt - 1)));

        httplib::Client cli(endpoint_.base_url);
        cli.set_connection_timeout(std::chrono::duration<double>(endpoint_.timeout_s));
        cli.set_read_timeout(std::chrono::duration<double>(endpoint_.timeout_s));
        httplib::Headers headers;
        if (!endpoint_.auth_token_env_var.empty()) {
            if (const char* token = std::getenv(endpoint_.auth_token_env_var.c_str()))
                headers.emplace("Authorization", std::string("Bearer ") + token);
        }

        auto res = cli.Post(endpoint_.path, headers, body, "application/json");
        if (res && res->status >= 200 && res->status < 300) {
            const std::string text = extract_completion_text(res->body);
            std::lock_guard<std::mutex> lock(log_mutex_);
            log_.push_back({prompt, text, res->status});
            return text;
        }
        last_error = res ? "status " + std::to_string(res->status)
                         : "connection failure (" + httplib::to_string(res.error()) + ")";
    }
    throw TransportError("completion request to " + endpoint_.base_url + endpoint_.path +
                         " failed after " + std::to_string(endpoint_.retries + 1) +
                         " attempts: " + last_error);
}

ParseOutcome llm_agent_act(LlmClient& client, PromptKind kind,
                           std::span<const EpisodeRecord> history, const EnvMeta& meta) {
    const std::string prompt = render_prompt(kind, meta.periods, meta.budget, history);
    const std::string response = client.complete(prompt);
    return parse_answer(response, meta.periods);
}

LlmAgent::LlmAgent(CompletionEndpoint endpoint, PromptKind kind)
    : endpoint_(std::move(endpoint)),
      kind_(kind),
      client_(std::make_unique<LlmClient>(endpoint_)) {}

std::vector<double> LlmAgent::act(std::span<const EpisodeRecord> history, const EnvMeta& meta) {
    const ParseOutcome outcome = llm_agent_act(*client_, kind_, history, meta);
    if (!outcome.ok) return {};  // scored as a dimension mismatch downstream
    return outcome.values;
}

std::unique_ptr<Agent> LlmAgent::clone_for_run(std::uint64_t) const {
    return std::make_unique<LlmAgent>(endpoint_, kind_);
}

std::string LlmAgent::name() const {
    return kind_ == PromptKind::Reasoner ? "llm-reasoner" : "llm-optimizer";
}

}  // namespace budgetlab
