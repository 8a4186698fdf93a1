#pragma once
// Scripted transport: replays queued responses, else answers like the mock.

#include <deque>
#include <mutex>
#include <string>
#include <vector>

#include "evdetect/llm_client.hpp"
#include "json.hpp"

namespace fixtures {

class ScriptedTransport : public evdetect::Transport {
 public:
  struct Call {
    std::string path;
    nlohmann::json body;
    std::string api_key;
  };

  void queue(int status, std::string body = "{}") { script_.push_back({status, std::move(body)}); }
  void queue_completion(const std::string& text) {
    queue(200, nlohmann::json{{"choices", nlohmann::json::array({{{"text", text}}})}}.dump());
  }

  evdetect::HttpResponse post(const std::string& path, const std::string& body, const std::string& api_key,
                              double timeout_seconds) override {
    std::lock_guard lock(mutex_);
    calls.push_back({path, nlohmann::json::parse(body), api_key});
    if (!script_.empty()) {
      auto r = script_.front();
      script_.pop_front();
      return r;
    }
    return fallback_.post(path, body, api_key, timeout_seconds);
  }

  std::vector<Call> calls;

 private:
  std::mutex mutex_;
  std::deque<evdetect::HttpResponse> script_;
  evdetect::MockTransport fallback_{8};
};

}  // namespace fixtures
