#pragma once

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>

#include <json.hpp>

#include "onepixel/errors.hpp"
#include "onepixel/oracle.hpp"
#include "onepixel/png_io.hpp"
#include "onepixel/rng.hpp"

namespace onepixel {

struct ServerConfig {
  std::string bind_address = "127.0.0.1";
  int port = 5000;  // 0 picks a free port
  std::shared_ptr<Oracle> oracle;
  std::chrono::milliseconds latency{0};
  double failure_rate = 0.0;  // fraction of predict requests answered 503
  std::uint64_t seed = 0;     // drives the injected-failure coin flips
};

// HTTP front end for an oracle, serving the wire protocol the attack client
// speaks: POST /model/predict with a multipart PNG under the field "image",
// answered with {"status":"ok","predictions":[{"probability": s}]}.
// Also the fault-injection harness: a seeded coin turns a configurable
// fraction of predict requests into 503s before the oracle is consulted.
class ModelServer {
 public:
  explicit ModelServer(ServerConfig cfg) : cfg_(std::move(cfg)) {
    if (!cfg_.oracle) throw ConfigError("model server needs an oracle");
    if (cfg_.failure_rate < 0.0 || cfg_.failure_rate > 1.0)
      throw ConfigError("failure_rate must be within [0, 1]");
    if (cfg_.port < 0 || cfg_.port > 65535)
      throw ConfigError("port must be within [0, 65535]");
    failure_rng_ = std::make_unique<Rng>(cfg_.seed);
    install_routes();
  }

  ~ModelServer() { stop(); }

  ModelServer(const ModelServer&) = delete;
  ModelServer& operator=(const ModelServer&) = delete;

  // Binds, then serves from a background thread. Returns once the server
  // accepts connections.
  void start() {
    if (thread_.joinable()) throw std::logic_error("server already started");
    server_.set_tcp_nodelay(true);
    if (cfg_.port == 0) {
      const int picked = server_.bind_to_any_port(cfg_.bind_address);
      if (picked < 0)
        throw Error("failed to bind " + cfg_.bind_address + " on a free port");
      port_ = picked;
    } else {
      if (!server_.bind_to_port(cfg_.bind_address, cfg_.port))
        throw Error("failed to bind " + cfg_.bind_address + ":" +
                    std::to_string(cfg_.port));
      port_ = cfg_.port;
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    if (!thread_.joinable()) return;
    server_.stop();
    thread_.join();
  }

  bool running() const { return server_.is_running(); }

  int port() const { return port_; }

  std::string url() const {
    return "http://" + cfg_.bind_address + ":" + std::to_string(port_) +
           "/model/predict";
  }

  // Predict requests handled, injected failures and rejections included.
  std::uint64_t requests_served() const { return requests_served_.load(); }

 private:
  void install_routes() {
    server_.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok"})", "application/json");
    });

    server_.Post("/model/predict", [this](const httplib::Request& req,
                                          httplib::Response& res) {
      requests_served_.fetch_add(1);
      if (cfg_.latency.count() > 0) std::this_thread::sleep_for(cfg_.latency);
      if (flip_failure_coin()) {
        respond_error(res, 503, "injected failure");
        return;
      }
      if (!req.has_file("image")) {
        respond_error(res, 400, "multipart field 'image' is required");
        return;
      }
      const httplib::MultipartFormData file = req.get_file_value("image");
      double score = 0.0;
      try {
        const RgbImage image = decode_png(file.content);
        score = cfg_.oracle->score(image).value();
      } catch (const DecodeError& e) {
        respond_error(res, 400, std::string("image is not a decodable PNG: ") +
                                    e.what());
        return;
      } catch (const std::exception& e) {
        respond_error(res, 500, std::string("scoring failed: ") + e.what());
        return;
      }
      nlohmann::json body = {
          {"status", "ok"},
          {"predictions", nlohmann::json::array({{{"probability", score}}})},
      };
      res.set_content(body.dump(), "application/json");
    });
  }

  bool flip_failure_coin() {
    if (cfg_.failure_rate <= 0.0) return false;
    std::lock_guard<std::mutex> lock(rng_mutex_);
    return failure_rng_->uniform() < cfg_.failure_rate;
  }

  static void respond_error(httplib::Response& res, int status,
                            const std::string& message) {
    res.status = status;
    nlohmann::json body = {{"status", "error"}, {"message", message}};
    res.set_content(body.dump(), "application/json");
  }

  ServerConfig cfg_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::uint64_t> requests_served_{0};
  std::unique_ptr<Rng> failure_rng_;
  std::mutex rng_mutex_;
};

}  // namespace onepixel
