#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "evdetect/common.hpp"
#include "json.hpp"

namespace evdetect {

enum class ProviderMode { live, mock };

/// Model ids and endpoint are configuration, never hard-coded at call sites.
/// The API key is read from the environment variable named by api_key_env.
struct ProviderConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string embed_model = "text-embedding-ada-002";
  std::string chat_model = "gpt-3.5-turbo-instruct";
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout_seconds = 30.0;
  int max_retries = 3;
  int batch_size = 64;
  ProviderMode mode = ProviderMode::mock;
  int mock_dim = 64;
  int max_in_flight = 4;
  double backoff_base_seconds = 1.0;
  double backoff_factor = 2.0;
  std::uint64_t jitter_seed = 0;
  std::optional<std::filesystem::path> cache_dir;

  void validate() const;
};

/// HTTP failure after retries were exhausted (or a non-retryable status).
/// status 0 means no response was received.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int status, int attempts)
      : Error(what), status_(status), attempts_(attempts) {}
  int status() const { return status_; }
  int attempts() const { return attempts_; }

 private:
  int status_;
  int attempts_;
};

struct HttpResponse {
  int status = 0;  // 0: no response (connection failure, timeout)
  std::string body;
};

class Transport {
 public:
  virtual ~Transport() = default;
  /// POST a JSON body to base_url + path.
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const std::string& api_key, double timeout_seconds) = 0;
};

/// cpp-httplib backed transport for the live provider.
std::shared_ptr<Transport> make_http_transport(const std::string& base_url);

/// Answers /embeddings and /completions locally with mock_embed and
/// mock_chat_reply, speaking the same wire format as a live provider.
class MockTransport : public Transport {
 public:
  explicit MockTransport(int dim) : dim_(dim) {}
  HttpResponse post(const std::string& path, const std::string& body, const std::string& api_key,
                    double timeout_seconds) override;

 private:
  int dim_;
};

/// Deterministic unit-norm pseudo-embedding. The seed is
/// fnv1a64(model_id + '\x1f' + text); coordinates are successive splitmix64
/// outputs mapped to [-1, 1) via (x >> 11) * 2^-52 - 1, then L2-normalized.
/// Not semantically meaningful.
Vector mock_embed(std::string_view text, int dim, std::string_view model_id);

/// "MOCK(" + first 8 hex digits of fnv1a64(prompt) + ")".
std::string mock_chat_reply(std::string_view prompt);
bool is_mock_reply(std::string_view reply);

/// One JSON file per entry under a directory, named by the 64-bit content key.
/// The full input is stored with the payload and compared on read, so a key
/// collision reads as a miss.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<nlohmann::json> get(const std::string& endpoint, const std::string& model,
                                    const std::string& input) const;
  void put(const std::string& endpoint, const std::string& model, const std::string& input,
           const nlohmann::json& payload);

  static std::uint64_t key(const std::string& endpoint, const std::string& model,
                           const std::string& input);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
};

struct ClientStats {
  std::size_t requests = 0;  // HTTP attempts, including retries
  std::size_t batches = 0;
  std::size_t cache_hits = 0;
  std::size_t cache_writes = 0;
  std::vector<double> backoff_delays;
};

class ProviderClient {
 public:
  /// With transport == nullptr, mock mode uses MockTransport and live mode an
  /// HTTP transport to cfg.base_url.
  explicit ProviderClient(ProviderConfig cfg, std::shared_ptr<Transport> transport = nullptr);

  const ProviderConfig& config() const { return cfg_; }

  /// Cached, batched embedding of texts with cfg.embed_model (or model_id
  /// when non-empty). Order preserved.
  std::vector<Vector> embed(const std::vector<std::string>& texts,
                            const std::string& model_id = {});

  /// One /embeddings request (with retries) for all texts; bypasses the cache.
  std::vector<Vector> embed_request(const std::vector<std::string>& texts,
                                    const std::string& model_id = {});

  /// First completion's text. Cached when temperature == 0.
  std::string chat_complete(const std::string& prompt, int max_tokens = 64,
                            double temperature = 0.0);

  /// Replaces the sleep used between retries (tests record instead of sleeping).
  void set_sleeper(std::function<void(double)> sleeper) { sleeper_ = std::move(sleeper); }

  ClientStats stats() const;

 private:
  nlohmann::json post_with_retry(const std::string& path, const nlohmann::json& request);
  std::string api_key() const;

  ProviderConfig cfg_;
  std::shared_ptr<Transport> transport_;
  std::unique_ptr<ResponseCache> cache_;
  std::function<void(double)> sleeper_;
  std::unique_ptr<std::counting_semaphore<256>> in_flight_;

  mutable std::mutex stats_mutex_;
  ClientStats stats_;
  std::uint64_t jitter_state_;
};

}  // namespace evdetect
