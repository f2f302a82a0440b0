#include "imhs/error.hpp"
#include "imhs/gateway.hpp"

#include <httplib.h>

namespace imhs::gateway {

namespace {

class HttplibTransport final : public HttpTransport {
public:
  explicit HttplibTransport(std::chrono::milliseconds timeout) : timeout_(timeout) {}

  HttpResponse post(const std::string& url, const std::string& body, const Headers& headers) override {
    // Split "scheme://host[:port]" from the path.
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      throw Error(ErrorKind::InvalidConfig, "URL without scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);

    httplib::Headers hdrs;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        hdrs.emplace(k, v);
      }
    }
    auto result = client.Post(path, hdrs, body, content_type);
    if (!result) {
      throw Error(ErrorKind::HttpError, "request to " + url + " failed: " + httplib::to_string(result.error()));
    }
    return {result->status, result->body};
  }

private:
  std::chrono::milliseconds timeout_;
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport(std::chrono::milliseconds timeout) {
  return std::make_shared<HttplibTransport>(timeout);
}

}  // namespace imhs::gateway
