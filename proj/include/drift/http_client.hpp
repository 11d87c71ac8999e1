#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "drift/datagen.hpp"

namespace drift {

/// Endpoint settings for an OpenAI-style chat completion server.
struct HttpClientConfig {
  std::string host = "localhost";
  int port = 8000;
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key;
  int timeout_seconds = 60;
  int retries = 2;
  double temperature = 0.7;

  /// DRIFT_GEN_HOST, DRIFT_GEN_PORT, DRIFT_GEN_PATH, DRIFT_GEN_MODEL and
  /// DRIFT_GEN_API_KEY override the fields that are set.
  void apply_env() {
    if (const char* v = std::getenv("DRIFT_GEN_HOST")) host = v;
    if (const char* v = std::getenv("DRIFT_GEN_PORT")) port = std::atoi(v);
    if (const char* v = std::getenv("DRIFT_GEN_PATH")) path = v;
    if (const char* v = std::getenv("DRIFT_GEN_MODEL")) model = v;
    if (const char* v = std::getenv("DRIFT_GEN_API_KEY")) api_key = v;
  }
};

class HttpClient : public GenClient {
 public:
  explicit HttpClient(HttpClientConfig cfg) : cfg_(std::move(cfg)) {}

  std::string complete(const std::string& prompt) override {
    const nlohmann::json body = {{"model", cfg_.model},
                                 {"temperature", cfg_.temperature},
                                 {"messages", {{{"role", "user"}, {"content", prompt}}}}};
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    std::string last;
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
      if (attempt) std::this_thread::sleep_for(std::chrono::milliseconds(250 << attempt));
      httplib::Client cli(cfg_.host, cfg_.port);
      cli.set_connection_timeout(cfg_.timeout_seconds);
      cli.set_read_timeout(cfg_.timeout_seconds);
      const auto res = cli.Post(cfg_.path, headers, body.dump(), "application/json");
      if (!res) {
        last = httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last = "HTTP " + std::to_string(res->status);
        if (res->status < 500 && res->status != 429) break;
        continue;
      }
      try {
        const auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ClientError, std::string("unexpected completion payload: ") + e.what());
      }
    }
    throw Error(ErrorKind::ClientError, cfg_.host + ":" + std::to_string(cfg_.port) + cfg_.path + ": " + last);
  }

  std::string name() const override { return cfg_.model.empty() ? "http" : cfg_.model; }

 private:
  HttpClientConfig cfg_;
};

}  // namespace drift
