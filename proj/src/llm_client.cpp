#include "smartgen/llm_client.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include "smartgen/error.hpp"

namespace smartgen {

void LlmClientConfig::validate() const {
    if (base_url.empty()) throw ConfigError("llm: base_url is empty");
    if (model_name.empty()) throw ConfigError("llm: model_name is empty");
    if (max_retries < 0) throw ConfigError("llm: max_retries must be >= 0");
    if (parallel_requests < 1) throw ConfigError("llm: parallel_requests must be >= 1");
    if (timeout.count() <= 0) throw ConfigError("llm: timeout must be positive");
}

nlohmann::json chat_request_body(const LlmClientConfig& cfg, const PromptBundle& bundle) {
    return {{"model", cfg.model_name},
            {"messages",
             {{{"role", "system"}, {"content", bundle.system_text}}, {{"role", "user"}, {"content", bundle.user_text}}}},
            {"temperature", bundle.temperature},
            {"max_tokens", bundle.max_output_tokens}};
}

std::string chat_response_content(const std::string& body, int status) {
    try {
        const auto j = nlohmann::json::parse(body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw EndpointError(status, std::string{"endpoint reply has no message content: "} + e.what());
    }
}

ChatClient::ChatClient(LlmClientConfig cfg, std::shared_ptr<HttpTransport> transport, std::string log_dir,
                       Sleeper sleeper)
    : cfg_(std::move(cfg)), transport_(std::move(transport)), log_dir_(std::move(log_dir)),
      sleeper_(std::move(sleeper)) {
    cfg_.validate();
    if (!transport_) throw ConfigError("llm: no transport");
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::vector<Transcript> ChatClient::transcripts() const {
    std::lock_guard lock(mu_);
    return transcripts_;
}

std::string ChatClient::complete(const PromptBundle& bundle) {
    Transcript tr;
    tr.request = chat_request_body(cfg_, bundle);

    HttpRequest req;
    std::string base = cfg_.base_url;
    while (!base.empty() && base.back() == '/') base.pop_back();
    req.url = base + "/chat/completions";
    req.body = tr.request.dump();
    req.headers["Content-Type"] = "application/json";
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
        req.headers["Authorization"] = std::string{"Bearer "} + key;
    }

    auto record = [&](bool finished) {
        std::lock_guard lock(mu_);
        const int n = calls_++;
        if (!log_dir_.empty()) {
            char name[32];
            std::snprintf(name, sizeof name, "%03d.json", n);
            nlohmann::json j{{"url", req.url},
                             {"headers", {{"Content-Type", "application/json"},
                                          {"Authorization", req.headers.count("Authorization") ? "Bearer ***" : ""}}},
                             {"request", tr.request},
                             {"attempts", tr.attempts},
                             {"succeeded", finished},
                             {"content", tr.content}};
            write_file((std::filesystem::path{log_dir_} / name).string(), j.dump(1) + "\n");
        }
        transcripts_.push_back(tr);
    };

    std::string last_error;
    auto backoff = cfg_.initial_backoff;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            sleeper_(backoff);
            backoff *= 2;
        }
        HttpResponse resp;
        try {
            resp = transport_->post(req, cfg_.timeout);
        } catch (const TransportError& e) {
            last_error = e.what();
            tr.attempts.push_back({{"attempt", attempt + 1}, {"error", last_error}});
            continue;
        }
        tr.attempts.push_back({{"attempt", attempt + 1}, {"status", resp.status}});
        if (resp.status >= 200 && resp.status < 300) {
            try {
                tr.content = chat_response_content(resp.body, resp.status);
            } catch (...) {
                record(false);
                throw;
            }
            record(true);
            return tr.content;
        }
        last_error = "HTTP " + std::to_string(resp.status);
        if (resp.status == 429 || resp.status >= 500) continue;
        record(false);
        throw EndpointError(resp.status, "endpoint returned HTTP " + std::to_string(resp.status) + ": " +
                                             resp.body.substr(0, 200));
    }
    record(false);
    throw TransportError("endpoint unreachable after " + std::to_string(cfg_.max_retries + 1) +
                         " attempts (last: " + last_error + ")");
}

std::vector<std::string> complete_all(LanguageModel& model, const std::vector<PromptBundle>& bundles, int parallel) {
    std::vector<std::string> out(bundles.size());
    if (parallel <= 1 || bundles.size() <= 1) {
        for (std::size_t i = 0; i < bundles.size(); ++i) out[i] = model.complete(bundles[i]);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(bundles.size());
    std::vector<std::thread> workers;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(parallel), bundles.size());
    for (std::size_t w = 0; w < n; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < bundles.size(); i = next++) {
                try {
                    out[i] = model.complete(bundles[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

} // namespace smartgen
