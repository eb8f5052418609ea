#pragma once

// HTTP clients for externally hosted captioning and text-to-image models.
//   image_to_text: POST {"image": <base64 PNG>, "prompt": <text>} -> {"text": <text>}
//   text_to_image: POST {"text": <text>}                          -> {"image": <base64 PNG>}

#include <chrono>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "urbanvlp/calibration/adapters.hpp"
#include "urbanvlp/encoders/image_encoder.hpp"
#include "urbanvlp/io/encoding.hpp"

namespace urbanvlp {

struct HttpEndpoint {
  std::string base_url;  // scheme://host:port
  std::string path;      // e.g. /describe
  double timeout_seconds = 30.0;
  int retries = 2;
};

namespace detail {

inline nlohmann::json post_json(const HttpEndpoint& ep, const nlohmann::json& body) {
  httplib::Client client(ep.base_url);
  const auto secs = static_cast<time_t>(ep.timeout_seconds);
  const auto usecs = static_cast<time_t>((ep.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= ep.retries; ++attempt) {
    auto res = client.Post(ep.path, body.dump(), "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
    } else if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
    } else {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw AdapterError(ep.base_url + ep.path + ": malformed JSON response: " + e.what());
      }
    }
    if (attempt < ep.retries) std::this_thread::sleep_for(std::chrono::milliseconds(50 * (attempt + 1)));
  }
  throw AdapterError(ep.base_url + ep.path + ": " + last_error);
}

}  // namespace detail

class HttpImageToText final : public ImageToText {
 public:
  explicit HttpImageToText(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  std::string describe(const Tensor& image, const std::string& prompt) override {
    nlohmann::json body{{"image", io::base64_encode(io::encode_png(image))}, {"prompt", prompt}};
    const auto reply = detail::post_json(endpoint_, body);
    if (!reply.contains("text") || !reply["text"].is_string()) {
      throw AdapterError("image_to_text response lacks a \"text\" string");
    }
    return reply["text"].get<std::string>();
  }

 private:
  HttpEndpoint endpoint_;
};

class HttpTextToImage final : public TextToImage {
 public:
  HttpTextToImage(HttpEndpoint endpoint, std::size_t height, std::size_t width)
      : endpoint_(std::move(endpoint)), height_(height), width_(width) {}

  Tensor render(const std::string& text) override {
    const auto reply = detail::post_json(endpoint_, nlohmann::json{{"text", text}});
    if (!reply.contains("image") || !reply["image"].is_string()) {
      throw AdapterError("text_to_image response lacks an \"image\" string");
    }
    Tensor img;
    try {
      img = io::decode_png(io::base64_decode(reply["image"].get<std::string>()), 3);
    } catch (const DataError& e) {
      throw AdapterError(std::string("text_to_image returned an undecodable image: ") + e.what());
    }
    if (img.dim(0) != height_ || img.dim(1) != width_) img = center_crop_resize(img, height_, width_);
    return img;
  }

 private:
  HttpEndpoint endpoint_;
  std::size_t height_, width_;
};

}  // namespace urbanvlp
