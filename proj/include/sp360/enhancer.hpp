#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "sp360/raster.hpp"
#include "sp360/render.hpp"

namespace sp360 {

enum class EnhanceStage { Inpaint, Clean };

struct EnhanceRequest {
  EnhanceStage stage = EnhanceStage::Inpaint;
  Raster image;               // H×W×3
  std::optional<Raster> mask;  // H×W, 1 = inpaint; inpaint only
  std::string prompt;
  int steps = 20;
  double image_guidance = 2.5;  // clean only
  double text_guidance = 7.0;   // clean only
  double t_min = 0.98;
  double t_max = 0.99;
};

struct EnhanceResponse {
  Raster image;
  std::string backend;
};

// Wire format: JSON bodies with base64 PNG payloads, keys in protocol order.
std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);
std::string encode_request_json(const EnhanceRequest& request);
EnhanceRequest decode_request_json(EnhanceStage stage, const std::string& body);
std::string encode_response_json(const EnhanceResponse& response);
EnhanceResponse decode_response_json(const std::string& body);
const char* endpoint_path(EnhanceStage stage);

class Enhancer {
 public:
  virtual ~Enhancer() = default;
  virtual EnhanceResponse enhance(const EnhanceRequest& request) = 0;
};

/// Returns the request image unchanged.
class IdentityEnhancer final : public Enhancer {
 public:
  EnhanceResponse enhance(const EnhanceRequest& request) override;
};

/// Replaces masked pixels (all pixels for requests without a mask) by a
/// constant color.
class FillEnhancer final : public Enhancer {
 public:
  explicit FillEnhancer(Eigen::Vector3d color) : color_(std::move(color)) {}
  EnhanceResponse enhance(const EnhanceRequest& request) override;

 private:
  Eigen::Vector3d color_;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  std::chrono::milliseconds timeout{120000};
};

/// Client for the enhancement service over HTTP+JSON.
class HttpEnhancer final : public Enhancer {
 public:
  /// endpoint like "http://127.0.0.1:8080".
  explicit HttpEnhancer(std::string endpoint, RetryPolicy policy = {});
  EnhanceResponse enhance(const EnhanceRequest& request) override;
  /// Backend tag reported by /v1/health.
  std::string health();

 private:
  std::string post(const char* path, const std::string& body);
  std::string endpoint_;
  RetryPolicy policy_;
};

/// "identity", "fill" or an http(s) endpoint.
std::unique_ptr<Enhancer> make_enhancer(const std::string& locator, RetryPolicy policy = {});

struct EnhanceConfig {
  double tau = 0.8;
  std::string inpaint_prompt = "A photo of [V]";
  std::string clean_prompt = "Denoise the noisy image and remove all floaters and Gaussian artifacts.";
  int steps = 20;
  double image_guidance = 2.5;
  double text_guidance = 7.0;
  double t_max = 0.99;
  // t_min decays linearly over the schedule steps.
  double inpaint_t_min_start = 0.98;
  double inpaint_t_min_end = 0.90;
  double clean_t_min_start = 0.98;
  double clean_t_min_end = 0.70;
};

/// Linear interpolation from start (step 0) to end (step steps−1).
double t_min_at(double start, double end, std::size_t step, std::size_t steps);

/// Inpaints the low-opacity region of a render, then cleans the result.
Raster enhance_view(Enhancer& enhancer, const RenderOutput& render, const EnhanceConfig& cfg, std::size_t step = 0,
                    std::size_t steps = 1);

}  // namespace sp360
