// Eigen must come first: httplib pulls in <resolv.h>, whose _res macro breaks Eigen.
#include "evdetect/llm_client.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace evdetect {

namespace {

class HttpTransport : public Transport {
 public:
  explicit HttpTransport(const std::string& base_url) {
    // Split "https://host[:port]/prefix" into the client origin and a path prefix.
    const auto scheme = base_url.find("://");
    const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
    const auto slash = base_url.find('/', host_start);
    origin_ = slash == std::string::npos ? base_url : base_url.substr(0, slash);
    prefix_ = slash == std::string::npos ? "" : base_url.substr(slash);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  HttpResponse post(const std::string& path, const std::string& body, const std::string& api_key,
                    double timeout_seconds) override {
    httplib::Client client(origin_);
    const auto seconds = static_cast<time_t>(timeout_seconds);
    const auto micros = static_cast<time_t>((timeout_seconds - seconds) * 1e6);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto result = client.Post(prefix_ + path, headers, body, "application/json");
    if (!result) return {0, httplib::to_string(result.error())};
    return {result->status, result->body};
  }

 private:
  std::string origin_;
  std::string prefix_;
};

}  // namespace

std::shared_ptr<Transport> make_http_transport(const std::string& base_url) {
  return std::make_shared<HttpTransport>(base_url);
}

}  // namespace evdetect
