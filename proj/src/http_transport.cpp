#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "ocov/enrich.hpp"
#include "ocov/text.hpp"

namespace ocov::enrich {

namespace {

class HttpsTransport : public HttpTransport {
 public:
  explicit HttpsTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

  HttpResponse get(const std::string& url, const std::map<std::string, std::string>& headers) override {
    // "scheme://host[:port]" + path-and-query
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw TransportError("not an absolute URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string target = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client cli(origin);
    cli.set_connection_timeout(timeout_);
    cli.set_read_timeout(timeout_);
    cli.set_follow_location(true);
    httplib::Headers h(headers.begin(), headers.end());
    auto res = cli.Get(target, h);
    if (!res) throw TransportError(httplib::to_string(res.error()) + " for " + origin);
    HttpResponse out;
    out.status = res->status;
    out.body = res->body;
    for (auto& [k, v] : res->headers) out.headers[text::lower(k)] = v;
    return out;
  }

 private:
  std::chrono::seconds timeout_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_https_transport(std::chrono::seconds timeout) {
  return std::make_unique<HttpsTransport>(timeout);
}

}  // namespace ocov::enrich
