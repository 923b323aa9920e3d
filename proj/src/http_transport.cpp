#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "smartgen/error.hpp"
#include "smartgen/llm_client.hpp"

namespace smartgen {

namespace {

class HttplibTransport final : public HttpTransport {
public:
    HttpResponse post(const HttpRequest& req, std::chrono::milliseconds timeout) override {
        // split "scheme://host[:port]" from the path
        const auto scheme_end = req.url.find("://");
        if (scheme_end == std::string::npos) throw TransportError("malformed URL '" + req.url + "'");
        const auto path_start = req.url.find('/', scheme_end + 3);
        const std::string origin = req.url.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : req.url.substr(path_start);

        httplib::Client cli(origin);
        cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count());
        cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count());
        httplib::Headers headers;
        std::string content_type = "application/json";
        for (const auto& [k, v] : req.headers) {
            if (k == "Content-Type") {
                content_type = v;
            } else {
                headers.emplace(k, v);
            }
        }
        auto res = cli.Post(path, headers, req.body, content_type);
        if (!res) throw TransportError("HTTP request to " + origin + " failed: " + httplib::to_string(res.error()));
        return HttpResponse{res->status, res->body};
    }
};

} // namespace

std::shared_ptr<HttpTransport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

} // namespace smartgen
