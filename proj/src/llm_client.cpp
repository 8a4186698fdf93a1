#include "evdetect/llm_client.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

namespace evdetect {

using nlohmann::json;

void ProviderConfig::validate() const {
  if (batch_size < 1) throw ConfigError("provider batch_size must be >= 1");
  if (max_retries < 0) throw ConfigError("provider max_retries must be >= 0");
  if (max_in_flight < 1 || max_in_flight > 256)
    throw ConfigError("provider max_in_flight must lie in [1, 256]");
  if (mock_dim < 2) throw ConfigError("provider mock_dim must be >= 2");
  if (timeout_seconds <= 0) throw ConfigError("provider timeout must be positive");
}

Vector mock_embed(std::string_view text, int dim, std::string_view model_id) {
  if (dim < 2) throw PreconditionError("mock_embed: dim must be >= 2");
  std::string material;
  material.reserve(model_id.size() + 1 + text.size());
  material.append(model_id).push_back('\x1f');
  material.append(text);
  std::uint64_t state = fnv1a64(material);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) {
    v[i] = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
  }
  const double norm = v.norm();
  if (norm == 0.0) {
    v.setZero();
    v[0] = 1.0;
    return v;
  }
  return v / norm;
}

std::string mock_chat_reply(std::string_view prompt) {
  return "MOCK(" + to_hex(fnv1a64(prompt)).substr(0, 8) + ")";
}

bool is_mock_reply(std::string_view reply) {
  return reply.size() == 14 && reply.substr(0, 5) == "MOCK(" && reply.back() == ')';
}

HttpResponse MockTransport::post(const std::string& path, const std::string& body,
                                 const std::string&, double) {
  json request;
  try {
    request = json::parse(body);
  } catch (const json::parse_error&) {
    return {400, R"({"error":"invalid json"})"};
  }
  const std::string model = request.value("model", "");
  if (path == "/embeddings") {
    json data = json::array();
    const auto& input = request.at("input");
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Vector v = mock_embed(input[i].get<std::string>(), dim_, model);
      data.push_back({{"index", i}, {"embedding", std::vector<double>(v.begin(), v.end())}});
    }
    return {200, json{{"data", data}, {"model", model}}.dump()};
  }
  if (path == "/completions") {
    const std::string prompt = request.at("prompt").get<std::string>();
    return {200, json{{"choices", json::array({{{"text", mock_chat_reply(prompt)}}})}}.dump()};
  }
  return {404, R"({"error":"unknown endpoint"})"};
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::uint64_t ResponseCache::key(const std::string& endpoint, const std::string& model,
                                 const std::string& input) {
  std::uint64_t h = fnv1a64(endpoint);
  h = fnv1a64(std::string_view("\0", 1), h);
  h = fnv1a64(model, h);
  h = fnv1a64(std::string_view("\0", 1), h);
  return fnv1a64(input, h);
}

std::optional<json> ResponseCache::get(const std::string& endpoint, const std::string& model,
                                       const std::string& input) const {
  const auto path = dir_ / (to_hex(key(endpoint, model, input)) + ".json");
  std::shared_lock lock(mutex_);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  json entry;
  try {
    in >> entry;
  } catch (const json::parse_error&) {
    return std::nullopt;
  }
  if (entry.value("endpoint", "") != endpoint || entry.value("model", "") != model ||
      entry.value("input", "") != input || !entry.contains("payload")) {
    return std::nullopt;
  }
  return entry["payload"];
}

void ResponseCache::put(const std::string& endpoint, const std::string& model,
                        const std::string& input, const json& payload) {
  const auto k = key(endpoint, model, input);
  const auto path = dir_ / (to_hex(k) + ".json");
  char stamp[32];
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
  const json entry{{"key", to_hex(k)},  {"endpoint", endpoint}, {"model", model},
                   {"input", input},    {"payload", payload},   {"created_at", stamp}};
  std::unique_lock lock(mutex_);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp);
    out << entry.dump();
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------

ProviderClient::ProviderClient(ProviderConfig cfg, std::shared_ptr<Transport> transport)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      sleeper_([](double s) {
        std::this_thread::sleep_for(std::chrono::duration<double>(s));
      }),
      jitter_state_(cfg_.jitter_seed) {
  cfg_.validate();
  if (!transport_) {
    transport_ = cfg_.mode == ProviderMode::mock
                     ? std::static_pointer_cast<Transport>(std::make_shared<MockTransport>(cfg_.mock_dim))
                     : make_http_transport(cfg_.base_url);
  }
  if (cfg_.cache_dir) cache_ = std::make_unique<ResponseCache>(*cfg_.cache_dir);
  in_flight_ = std::make_unique<std::counting_semaphore<256>>(cfg_.max_in_flight);
}

ClientStats ProviderClient::stats() const {
  std::lock_guard lock(stats_mutex_);
  return stats_;
}

std::string ProviderClient::api_key() const {
  if (cfg_.mode == ProviderMode::mock) return {};
  const char* value = std::getenv(cfg_.api_key_env.c_str());
  if (value == nullptr || *value == '\0') {
    throw ConfigError("live provider mode needs an API key in environment variable " +
                      cfg_.api_key_env);
  }
  return value;
}

json ProviderClient::post_with_retry(const std::string& path, const json& request) {
  const std::string key = api_key();
  const std::string body = request.dump();
  const int max_attempts = cfg_.max_retries + 1;
  int last_status = 0;
  std::string last_body;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    HttpResponse response;
    {
      in_flight_->acquire();
      try {
        response = transport_->post(path, body, key, cfg_.timeout_seconds);
      } catch (...) {
        in_flight_->release();
        throw;
      }
      in_flight_->release();
    }
    {
      std::lock_guard lock(stats_mutex_);
      ++stats_.requests;
    }
    last_status = response.status;
    last_body = response.body;
    if (response.status >= 200 && response.status < 300) {
      try {
        return json::parse(response.body);
      } catch (const json::parse_error& e) {
        throw TransportError(path + ": unparseable response: " + e.what(), response.status,
                             attempt);
      }
    }
    const bool retryable =
        response.status == 0 || response.status == 429 || response.status >= 500;
    if (!retryable || attempt == max_attempts) {
      throw TransportError(path + " failed with HTTP status " + std::to_string(last_status) +
                               " after " + std::to_string(attempt) + " attempt(s)",
                           last_status, attempt);
    }
    // Exponential backoff; jitter stays below one factor step so delays never decrease.
    double delay = cfg_.backoff_base_seconds * std::pow(cfg_.backoff_factor, attempt - 1);
    double u;
    {
      std::lock_guard lock(stats_mutex_);
      u = static_cast<double>(splitmix64(jitter_state_) >> 11) * 0x1.0p-53;
    }
    delay *= 1.0 + 0.5 * u;
    {
      std::lock_guard lock(stats_mutex_);
      stats_.backoff_delays.push_back(delay);
    }
    sleeper_(delay);
  }
  throw TransportError(path + " failed", last_status, max_attempts);
}

std::vector<Vector> ProviderClient::embed_request(const std::vector<std::string>& texts,
                                                  const std::string& model_id) {
  const std::string model = model_id.empty() ? cfg_.embed_model : model_id;
  const json response = post_with_retry("/embeddings", json{{"model", model}, {"input", texts}});
  {
    std::lock_guard lock(stats_mutex_);
    ++stats_.batches;
  }
  if (!response.contains("data") || !response["data"].is_array() ||
      response["data"].size() != texts.size()) {
    throw TransportError("/embeddings: response does not carry one vector per input", 200, 1);
  }
  std::vector<Vector> out(texts.size());
  std::vector<bool> filled(texts.size(), false);
  for (std::size_t pos = 0; pos < response["data"].size(); ++pos) {
    const auto& item = response["data"][pos];
    const std::size_t index = item.contains("index") ? item["index"].get<std::size_t>() : pos;
    if (index >= texts.size() || filled[index])
      throw TransportError("/embeddings: bad index in response", 200, 1);
    const auto values = item.at("embedding").get<std::vector<double>>();
    out[index] = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    filled[index] = true;
  }
  return out;
}

std::vector<Vector> ProviderClient::embed(const std::vector<std::string>& texts,
                                          const std::string& model_id) {
  const std::string model = model_id.empty() ? cfg_.embed_model : model_id;
  std::vector<Vector> out(texts.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (cache_) {
      if (auto hit = cache_->get("/embeddings", model, texts[i])) {
        const auto values = hit->get<std::vector<double>>();
        out[i] = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
        std::lock_guard lock(stats_mutex_);
        ++stats_.cache_hits;
        continue;
      }
    }
    missing.push_back(i);
  }
  const auto batch = static_cast<std::size_t>(cfg_.batch_size);
  for (std::size_t start = 0; start < missing.size(); start += batch) {
    const std::size_t end = std::min(missing.size(), start + batch);
    std::vector<std::string> chunk;
    for (std::size_t m = start; m < end; ++m) chunk.push_back(texts[missing[m]]);
    auto vectors = embed_request(chunk, model);
    for (std::size_t m = start; m < end; ++m) {
      auto& v = vectors[m - start];
      if (cache_) {
        cache_->put("/embeddings", model, texts[missing[m]], std::vector<double>(v.begin(), v.end()));
        std::lock_guard lock(stats_mutex_);
        ++stats_.cache_writes;
      }
      out[missing[m]] = std::move(v);
    }
  }
  return out;
}

std::string ProviderClient::chat_complete(const std::string& prompt, int max_tokens,
                                          double temperature) {
  if (prompt.empty()) throw PreconditionError("chat_complete: empty prompt");
  const bool cacheable = cache_ && temperature == 0.0;
  if (cacheable) {
    if (auto hit = cache_->get("/completions", cfg_.chat_model, prompt)) {
      std::lock_guard lock(stats_mutex_);
      ++stats_.cache_hits;
      return hit->get<std::string>();
    }
  }
  const json response = post_with_retry(
      "/completions", json{{"model", cfg_.chat_model},
                           {"prompt", prompt},
                           {"max_tokens", max_tokens},
                           {"temperature", temperature}});
  std::string text;
  try {
    const auto& choice = response.at("choices").at(0);
    text = choice.contains("text") ? choice["text"].get<std::string>()
                                   : choice.at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("/completions: malformed response: ") + e.what(), 200, 1);
  }
  if (cacheable) {
    cache_->put("/completions", cfg_.chat_model, prompt, text);
    std::lock_guard lock(stats_mutex_);
    ++stats_.cache_writes;
  }
  return text;
}

}  // namespace evdetect
