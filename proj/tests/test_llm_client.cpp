#include <doctest.h>

#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "helpers.hpp"
#include "smartgen/llm_client.hpp"

using namespace smartgen;

namespace {

std::string ok_body(const std::string& content) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

// Scripted transport: each post pops the next outcome (status 0 = transport failure).
class FakeTransport : public HttpTransport {
public:
    explicit FakeTransport(std::deque<HttpResponse> script) : script_(std::move(script)) {}
    HttpResponse post(const HttpRequest& req, std::chrono::milliseconds) override {
        requests.push_back(req);
        auto r = script_.front();
        script_.pop_front();
        if (r.status == 0) throw TransportError("connection refused");
        return r;
    }
    std::vector<HttpRequest> requests;

private:
    std::deque<HttpResponse> script_;
};

PromptBundle bundle() {
    PromptBundle b;
    b.system_text = "system";
    b.user_text = "user";
    b.temperature = 0.5;
    b.max_output_tokens = 100;
    return b;
}

LlmClientConfig config(const std::string& url = "http://example.invalid/v1/") {
    LlmClientConfig c;
    c.base_url = url;
    c.model_name = "test-model";
    c.api_key_env = "SMARTGEN_TEST_KEY";
    c.max_retries = 3;
    c.initial_backoff = std::chrono::milliseconds(100);
    return c;
}

} // namespace

TEST_CASE("request body has exactly two messages and no key") {
    setenv("SMARTGEN_TEST_KEY", "sk-secret", 1);
    const auto j = chat_request_body(config(), bundle());
    CHECK(j["model"] == "test-model");
    REQUIRE(j["messages"].size() == 2);
    CHECK(j["messages"][0]["role"] == "system");
    CHECK(j["messages"][1]["content"] == "user");
    CHECK(j["temperature"] == 0.5);
    CHECK(j["max_tokens"] == 100);
    CHECK(j.dump().find("sk-secret") == std::string::npos);
}

TEST_CASE("response content extraction") {
    CHECK(chat_response_content(ok_body("hi"), 200) == "hi");
    CHECK_THROWS_AS(chat_response_content("{}", 200), EndpointError);
    CHECK_THROWS_AS(chat_response_content("not json", 200), EndpointError);
}

TEST_CASE("retries with exponential backoff then succeeds") {
    auto t = std::make_shared<FakeTransport>(std::deque<HttpResponse>{{0, ""}, {503, "busy"}, {429, ""}, {200, ok_body("done")}});
    std::vector<long> sleeps;
    ChatClient c(config(), t, {}, [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
    CHECK(c.complete(bundle()) == "done");
    CHECK(sleeps == std::vector<long>{100, 200, 400});
    REQUIRE(t->requests.size() == 4);
    CHECK(t->requests[0].url == "http://example.invalid/v1/chat/completions");
    CHECK(c.transcripts().at(0).attempts.size() == 4);
}

TEST_CASE("client errors fail immediately") {
    auto t = std::make_shared<FakeTransport>(std::deque<HttpResponse>{{401, "bad key"}});
    ChatClient c(config(), t, {}, [](std::chrono::milliseconds) {});
    try {
        c.complete(bundle());
        FAIL("expected EndpointError");
    } catch (const EndpointError& e) {
        CHECK(e.status() == 401);
    }
    CHECK(t->requests.size() == 1);
}

TEST_CASE("exhausted retries raise a transport error") {
    auto t = std::make_shared<FakeTransport>(std::deque<HttpResponse>{{500, ""}, {500, ""}, {0, ""}, {502, ""}});
    ChatClient c(config(), t, {}, [](std::chrono::milliseconds) {});
    CHECK_THROWS_AS(c.complete(bundle()), TransportError);
    CHECK(t->requests.size() == 4);
}

TEST_CASE("a 200 without content is an endpoint error") {
    auto t = std::make_shared<FakeTransport>(std::deque<HttpResponse>{{200, "{\"choices\": []}"}});
    ChatClient c(config(), t, {}, [](std::chrono::milliseconds) {});
    CHECK_THROWS_AS(c.complete(bundle()), EndpointError);
}

TEST_CASE("config validation") {
    auto c = config();
    c.parallel_requests = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = config();
    c.base_url.clear();
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(ChatClient(config(), nullptr), ConfigError);
}

TEST_CASE("wire format against a local server, key redacted in transcripts") {
    setenv("SMARTGEN_TEST_KEY", "sk-secret", 1);
    httplib::Server server;
    std::string seen_auth, seen_type, seen_path;
    nlohmann::json seen_body;
    server.Post(R"(/v1/chat/completions)", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        seen_type = req.get_header_value("Content-Type");
        seen_path = req.path;
        seen_body = nlohmann::json::parse(req.body);
        res.set_content(ok_body("<seq [] seq>"), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const auto dir = testing::scratch_dir("llm");
    ChatClient c(config("http://127.0.0.1:" + std::to_string(port) + "/v1"), make_http_transport(), dir);
    CHECK(c.complete(bundle()) == "<seq [] seq>");
    server.stop();
    th.join();

    CHECK(seen_path == "/v1/chat/completions");
    CHECK(seen_auth == "Bearer sk-secret");
    CHECK(seen_type == "application/json");
    CHECK(seen_body == chat_request_body(config(), bundle()));

    std::ifstream in(dir + "/000.json");
    const std::string log((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(log.find("sk-secret") == std::string::npos);
    CHECK(log.find("Bearer ***") != std::string::npos);
}

TEST_CASE("unreachable endpoint") {
    auto c = config("http://127.0.0.1:1/v1");
    c.max_retries = 1;
    ChatClient client(c, make_http_transport(), {}, [](std::chrono::milliseconds) {});
    CHECK_THROWS_AS(client.complete(bundle()), TransportError);
}

TEST_CASE("complete_all keeps bundle order") {
    struct Echo : LanguageModel {
        std::string complete(const PromptBundle& b) override { return b.user_text; }
    } echo;
    std::vector<PromptBundle> bundles;
    for (int i = 0; i < 9; ++i) {
        bundles.push_back(bundle());
        bundles.back().user_text = std::to_string(i);
    }
    for (int parallel : {1, 3}) {
        const auto out = complete_all(echo, bundles, parallel);
        for (int i = 0; i < 9; ++i) CHECK(out[i] == std::to_string(i));
    }
}
