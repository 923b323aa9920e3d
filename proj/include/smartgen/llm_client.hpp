#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartgen/synth.hpp"

namespace smartgen {

/// Anything that turns a prompt into response text: the HTTP client or the
/// simulator-backed mock.
class LanguageModel {
public:
    virtual ~LanguageModel() = default;
    virtual std::string complete(const PromptBundle& bundle) = 0;
};

struct HttpRequest {
    std::string url;  // absolute
    std::map<std::string, std::string> headers;
    std::string body;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Raises TransportError when no HTTP response was obtained.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const HttpRequest& req, std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport (http and https).
std::shared_ptr<HttpTransport> make_http_transport();

struct LlmClientConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model_name = "gpt-4o";
    std::string api_key_env = "OPENAI_API_KEY";
    std::chrono::milliseconds timeout{120000};
    int max_retries = 3;
    int parallel_requests = 1;
    std::chrono::milliseconds initial_backoff{500};

    void validate() const;
};

/// Request body for `POST {base_url}/chat/completions`: exactly a system
/// and a user message. Never contains credentials.
nlohmann::json chat_request_body(const LlmClientConfig& cfg, const PromptBundle& bundle);

/// Extracts choices[0].message.content; throws EndpointError when absent.
std::string chat_response_content(const std::string& body, int status);

/// Record of one completion call, written to `responses/NNN.json`.
struct Transcript {
    nlohmann::json request;  // body only
    std::vector<nlohmann::json> attempts;
    std::string content;
};

class ChatClient final : public LanguageModel {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    /// `log_dir`, when non-empty, receives one transcript file per call.
    ChatClient(LlmClientConfig cfg, std::shared_ptr<HttpTransport> transport, std::string log_dir = {},
               Sleeper sleeper = {});

    /// Retries transport failures, 429 and 5xx with exponential backoff up
    /// to max_retries. Other non-2xx statuses raise EndpointError at once;
    /// exhausted retries raise TransportError.
    std::string complete(const PromptBundle& bundle) override;

    std::vector<Transcript> transcripts() const;

private:
    LlmClientConfig cfg_;
    std::shared_ptr<HttpTransport> transport_;
    std::string log_dir_;
    Sleeper sleeper_;
    mutable std::mutex mu_;
    std::vector<Transcript> transcripts_;
    int calls_ = 0;
};

/// Runs one completion per bundle with up to `parallel` calls in flight;
/// results come back in bundle order.
std::vector<std::string> complete_all(LanguageModel& model, const std::vector<PromptBundle>& bundles, int parallel);

} // namespace smartgen
