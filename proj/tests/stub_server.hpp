#pragma once

// Reference implementation of the /predict contract, used for loopback
// tests of the external proposer adapter.

#include <atomic>
#include <mutex>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "firelabel/base64.hpp"
#include "firelabel/image_io.hpp"
#include "firelabel/proposer.hpp"

namespace firelabel::testing {

enum class StubMode { good, two_masks, score_out_of_range, wrong_dims, not_json, http_error };

class StubProposer {
 public:
  StubProposer() {
    server_.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubProposer() {
    server_.stop();
    thread_.join();
  }
  StubProposer(const StubProposer&) = delete;
  StubProposer& operator=(const StubProposer&) = delete;

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  void set_mode(StubMode m) { mode_ = m; }
  int requests() const { return requests_.load(); }
  nlohmann::json last_request() const {
    std::lock_guard lock(mu_);
    return last_request_;
  }

  // The masks a "good" response returns for a w x h image: left third,
  // middle third, and a centred rectangle.
  static std::array<BinaryMask, 3> known_masks(std::size_t w, std::size_t h) {
    std::array<BinaryMask, 3> m{BinaryMask(w, h), BinaryMask(w, h), BinaryMask(w, h)};
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        m[0](x, y) = x < w / 3;
        m[1](x, y) = x >= w / 3 && x < 2 * w / 3;
        m[2](x, y) = x >= w / 4 && x < 3 * w / 4 && y >= h / 4 && y < 3 * h / 4;
      }
    return m;
  }
  static constexpr std::array<double, 3> kScores{0.91, 0.42, 0.77};

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      res.status = 400;
      return;
    }
    {
      std::lock_guard lock(mu_);
      last_request_ = body;
    }
    const auto img = decode_png(base64::decode(body.at("image_png_b64").get<std::string>()));
    std::size_t w = img.width, h = img.height;
    if (mode_ == StubMode::http_error) {
      res.status = 503;
      return;
    }
    if (mode_ == StubMode::not_json) {
      res.set_content("this is not json", "application/json");
      return;
    }
    if (mode_ == StubMode::wrong_dims) ++w;
    const auto masks = known_masks(w, h);
    nlohmann::json out;
    out["masks_png_b64"] = nlohmann::json::array();
    for (const auto& m : masks) out["masks_png_b64"].push_back(base64::encode(encode_png(mask_to_image(m))));
    out["scores"] = kScores;
    if (mode_ == StubMode::two_masks) {
      out["masks_png_b64"].erase(2);
      out["scores"].erase(2);
    }
    if (mode_ == StubMode::score_out_of_range) out["scores"][1] = 1.3;
    res.set_content(out.dump(), "application/json");
  }

  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<StubMode> mode_{StubMode::good};
  std::atomic<int> requests_{0};
  mutable std::mutex mu_;
  nlohmann::json last_request_;
};

}  // namespace firelabel::testing
