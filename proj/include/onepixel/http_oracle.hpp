#pragma once

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "onepixel/errors.hpp"
#include "onepixel/oracle.hpp"
#include "onepixel/png_io.hpp"

namespace onepixel {

struct HttpOracleConfig {
  std::string endpoint = "http://localhost:5000/model/predict";
  // Slash-delimited locator of the score inside the JSON response; numeric
  // tokens index arrays. The remote schema is configuration, not code.
  std::string field_path = "predictions/0/probability";
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
  std::chrono::milliseconds retry_backoff{100};
  int max_parallel = 4;
};

// ONEPIXEL_ENDPOINT / ONEPIXEL_FIELD_PATH environment overrides.
inline HttpOracleConfig apply_env_overrides(HttpOracleConfig cfg) {
  if (const char* e = std::getenv("ONEPIXEL_ENDPOINT")) cfg.endpoint = e;
  if (const char* f = std::getenv("ONEPIXEL_FIELD_PATH")) cfg.field_path = f;
  return cfg;
}

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // /model/predict
};

inline ParsedUrl parse_url(const std::string& url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("endpoint URL needs a scheme: " + url);
  const std::size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

// Resolves a slash-delimited path of object keys and array indices inside a
// JSON document and returns the number found there.
inline double extract_score_field(const nlohmann::json& body, std::string_view path) {
  const nlohmann::json* node = &body;
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t slash = path.find('/', start);
    if (slash == std::string_view::npos) slash = path.size();
    const std::string_view token = path.substr(start, slash - start);
    if (!token.empty()) {
      const bool numeric = std::all_of(token.begin(), token.end(), [](char c) {
        return c >= '0' && c <= '9';
      });
      if (numeric && node->is_array()) {
        const std::size_t idx = std::stoul(std::string(token));
        if (idx >= node->size())
          throw OracleError(OracleErrorKind::MissingField,
                            "response field path '" + std::string(path) +
                                "': index " + std::string(token) +
                                " out of range");
        node = &(*node)[idx];
      } else if (node->is_object() && node->contains(std::string(token))) {
        node = &(*node)[std::string(token)];
      } else {
        throw OracleError(OracleErrorKind::MissingField,
                          "response field path '" + std::string(path) +
                              "': no element '" + std::string(token) + "'");
      }
    }
    if (slash == path.size()) break;
    start = slash + 1;
  }
  if (!node->is_number())
    throw OracleError(OracleErrorKind::NonNumericScore,
                      "response field path '" + std::string(path) +
                          "' holds a non-numeric value: " + node->dump());
  return node->get<double>();
}

namespace detail {

inline void configure_client(httplib::Client& cli, const HttpOracleConfig& cfg) {
  cli.set_connection_timeout(cfg.timeout);
  cli.set_read_timeout(cfg.timeout);
  cli.set_write_timeout(cfg.timeout);
  cli.set_keep_alive(true);
  // Attack loops issue thousands of small requests; Nagle's algorithm would
  // add a delayed-ACK stall to each one.
  cli.set_tcp_nodelay(true);
}

// One POST of the PNG bytes as a multipart file field named "image".
inline double http_score_attempt(httplib::Client& cli, const std::string& path,
                                 const HttpOracleConfig& cfg,
                                 const std::string& png_bytes) {
  const httplib::MultipartFormDataItems items = {
      {"image", png_bytes, "image.png", "image/png"},
  };
  httplib::Result res = cli.Post(path, items);
  if (!res) {
    const httplib::Error err = res.error();
    if (err == httplib::Error::ConnectionTimeout)
      throw OracleError(OracleErrorKind::Timeout,
                        "request to " + cfg.endpoint + " timed out");
    throw OracleError(OracleErrorKind::ConnectionFailed,
                      "request to " + cfg.endpoint +
                          " failed: " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300)
    throw OracleError(OracleErrorKind::HttpStatus,
                      "HTTP " + std::to_string(res->status) + " from " +
                          cfg.endpoint,
                      res->status);
  const nlohmann::json body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_discarded())
    throw OracleError(OracleErrorKind::UnparsableBody,
                      "response from " + cfg.endpoint + " is not valid JSON");
  return extract_score_field(body, cfg.field_path);
}

// Retry loop. Transport failures and 5xx responses are retried with
// exponential backoff; parse failures and 4xx responses are not.
inline ScoreValue http_score_with_client(httplib::Client& cli,
                                         const std::string& path,
                                         const HttpOracleConfig& cfg,
                                         const std::string& png_bytes) {
  std::chrono::milliseconds backoff = cfg.retry_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      return ScoreValue(http_score_attempt(cli, path, cfg, png_bytes));
    } catch (const OracleError& e) {
      if (!e.retryable() || attempt >= cfg.retries) throw;
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
}

}  // namespace detail

// Scores raw PNG bytes against a remote model endpoint.
inline ScoreValue http_score(const HttpOracleConfig& cfg, const std::string& png_bytes) {
  const ParsedUrl url = parse_url(cfg.endpoint);
  httplib::Client cli(url.base);
  detail::configure_client(cli, cfg);
  return detail::http_score_with_client(cli, url.path, cfg, png_bytes);
}

// Remote-model oracle. Keeps a pool of max_parallel keep-alive connections;
// concurrent callers beyond the pool size wait for a free connection, which
// bounds request-level parallelism.
class HttpOracle : public Oracle {
 public:
  explicit HttpOracle(HttpOracleConfig cfg) : cfg_(std::move(cfg)), url_(parse_url(cfg_.endpoint)) {
    if (cfg_.max_parallel < 1) throw ConfigError("max_parallel must be >= 1");
    if (cfg_.retries < 0) throw ConfigError("retries must be >= 0");
    for (int i = 0; i < cfg_.max_parallel; ++i) {
      auto cli = std::make_unique<httplib::Client>(url_.base);
      detail::configure_client(*cli, cfg_);
      pool_.push_back(std::move(cli));
      free_.push_back(i);
    }
  }

  ScoreValue score(const RgbImage& image) override {
    const std::string bytes = encode_png_string(image);
    const int slot = acquire();
    try {
      const ScoreValue v =
          detail::http_score_with_client(*pool_[slot], url_.path, cfg_, bytes);
      release(slot);
      return v;
    } catch (...) {
      release(slot);
      throw;
    }
  }

  const HttpOracleConfig& config() const { return cfg_; }

 private:
  int acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [this] { return !free_.empty(); });
    const int slot = free_.back();
    free_.pop_back();
    return slot;
  }

  void release(int slot) {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      free_.push_back(slot);
    }
    cv_.notify_one();
  }

  HttpOracleConfig cfg_;
  ParsedUrl url_;
  std::vector<std::unique_ptr<httplib::Client>> pool_;
  std::vector<int> free_;
  std::mutex mutex_;
  std::condition_variable cv_;
};

}  // namespace onepixel
