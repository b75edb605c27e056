#include "sp360/enhancer.hpp"

#include <boost/beast/core/detail/base64.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <thread>

#include "sp360/error.hpp"

namespace sp360 {

namespace b64 = boost::beast::detail::base64;

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  auto valid = [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '+' || c == '/';
  };
  std::size_t body = text.size();
  while (body > 0 && text[body - 1] == '=') --body;
  if (text.size() % 4 != 0 || text.size() - body > 2 || !std::all_of(text.begin(), text.begin() + body, valid)) {
    throw Error(ErrorCode::ProtocolViolation, "payload is not valid base64");
  }
  std::vector<std::uint8_t> out(b64::decoded_size(text.size()));
  out.resize(b64::decode(out.data(), text.data(), text.size()).first);
  return out;
}

namespace {

using ordered_json = nlohmann::ordered_json;

std::string png_field(const Raster& r) { return base64_encode(encode_png(r)); }

Raster raster_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw Error(ErrorCode::ProtocolViolation, std::string("missing string field '") + key + "'");
  }
  try {
    return decode_png(base64_decode(j[key].get<std::string>()));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ProtocolViolation) throw;
    throw Error(ErrorCode::ProtocolViolation, std::string("field '") + key + "' is not a PNG: " + e.what());
  }
}

nlohmann::json parse_body(const std::string& body) {
  try {
    auto j = nlohmann::json::parse(body);
    if (!j.is_object()) throw Error(ErrorCode::ProtocolViolation, "body is not a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ProtocolViolation, std::string("malformed JSON: ") + e.what());
  }
}

template <typename T>
T field(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::ProtocolViolation, std::string("missing or mistyped field '") + key + "'");
  }
}

}  // namespace

const char* endpoint_path(EnhanceStage stage) {
  return stage == EnhanceStage::Inpaint ? "/v1/inpaint" : "/v1/clean";
}

std::string encode_request_json(const EnhanceRequest& r) {
  ordered_json j;
  j["image"] = png_field(r.image);
  if (r.stage == EnhanceStage::Inpaint) {
    if (!r.mask) throw Error(ErrorCode::ProtocolViolation, "inpaint request without a mask");
    j["mask"] = png_field(*r.mask);
    j["prompt"] = r.prompt;
  } else {
    j["prompt"] = r.prompt;
    j["image_guidance"] = r.image_guidance;
    j["text_guidance"] = r.text_guidance;
  }
  j["steps"] = r.steps;
  j["t_min"] = r.t_min;
  j["t_max"] = r.t_max;
  return j.dump();
}

EnhanceRequest decode_request_json(EnhanceStage stage, const std::string& body) {
  const auto j = parse_body(body);
  EnhanceRequest r;
  r.stage = stage;
  r.image = raster_field(j, "image");
  if (stage == EnhanceStage::Inpaint) {
    r.mask = raster_field(j, "mask");
  } else {
    r.image_guidance = field<double>(j, "image_guidance");
    r.text_guidance = field<double>(j, "text_guidance");
  }
  r.prompt = field<std::string>(j, "prompt");
  r.steps = field<int>(j, "steps");
  r.t_min = field<double>(j, "t_min");
  r.t_max = field<double>(j, "t_max");
  return r;
}

std::string encode_response_json(const EnhanceResponse& r) {
  ordered_json j;
  j["image"] = png_field(r.image);
  j["backend"] = r.backend;
  return j.dump();
}

EnhanceResponse decode_response_json(const std::string& body) {
  const auto j = parse_body(body);
  return {raster_field(j, "image"), field<std::string>(j, "backend")};
}

EnhanceResponse IdentityEnhancer::enhance(const EnhanceRequest& request) { return {request.image, "stub-identity"}; }

EnhanceResponse FillEnhancer::enhance(const EnhanceRequest& request) {
  EnhanceResponse out{request.image, "stub-fill"};
  for (std::size_t p = 0; p < out.image.pixel_count(); ++p) {
    if (request.mask && request.mask->data[p] == 0.0) continue;
    for (int c = 0; c < out.image.channels; ++c) out.image.data[p * out.image.channels + c] = color_[c % 3];
  }
  return out;
}

HttpEnhancer::HttpEnhancer(std::string endpoint, RetryPolicy policy)
    : endpoint_(std::move(endpoint)), policy_(policy) {}

std::string HttpEnhancer::post(const char* path, const std::string& body) {
  httplib::Client client(endpoint_);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(policy_.timeout);
  client.set_connection_timeout(seconds);
  client.set_read_timeout(seconds);
  client.set_write_timeout(seconds);
  auto backoff = policy_.initial_backoff;
  std::string last_error = "no attempt made";
  for (int attempt = 1; attempt <= std::max(1, policy_.attempts); ++attempt) {
    auto res = client.Post(path, body, "application/json");
    if (res && res->status == 200) return res->body;
    if (res && res->status >= 400 && res->status < 500) {
      throw Error(ErrorCode::ProtocolViolation,
                  std::string(path) + " rejected the request with HTTP " + std::to_string(res->status));
    }
    last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    if (attempt < policy_.attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw Error(ErrorCode::EnhancerUnavailable, endpoint_ + path + ": " + last_error);
}

EnhanceResponse HttpEnhancer::enhance(const EnhanceRequest& request) {
  return decode_response_json(post(endpoint_path(request.stage), encode_request_json(request)));
}

std::string HttpEnhancer::health() {
  httplib::Client client(endpoint_);
  auto res = client.Get("/v1/health");
  if (!res || res->status != 200) throw Error(ErrorCode::EnhancerUnavailable, endpoint_ + "/v1/health failed");
  const auto j = parse_body(res->body);
  if (field<std::string>(j, "status") != "ok") throw Error(ErrorCode::EnhancerUnavailable, "service not ok");
  return field<std::string>(j, "backend");
}

std::unique_ptr<Enhancer> make_enhancer(const std::string& locator, RetryPolicy policy) {
  if (locator == "identity") return std::make_unique<IdentityEnhancer>();
  if (locator == "fill") return std::make_unique<FillEnhancer>(Eigen::Vector3d::Constant(0.5));
  if (locator.rfind("http://", 0) == 0 || locator.rfind("https://", 0) == 0) {
    return std::make_unique<HttpEnhancer>(locator, policy);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown enhancer '" + locator + "'");
}

double t_min_at(double start, double end, std::size_t step, std::size_t steps) {
  if (steps <= 1) return start;
  const double u = static_cast<double>(std::min(step, steps - 1)) / static_cast<double>(steps - 1);
  return start + (end - start) * u;
}

namespace {

Raster checked(const EnhanceResponse& res, const Raster& sent, const char* stage) {
  if (res.image.width != sent.width || res.image.height != sent.height) {
    throw Error(ErrorCode::ProtocolViolation,
                std::string(stage) + " returned " + std::to_string(res.image.width) + "x" +
                    std::to_string(res.image.height) + " for a " + std::to_string(sent.width) + "x" +
                    std::to_string(sent.height) + " request");
  }
  if (res.image.channels == 3) return res.image;
  if (res.image.channels != 1) throw Error(ErrorCode::ProtocolViolation, std::string(stage) + " channel count");
  Raster rgb(res.image.width, res.image.height, 3);
  for (std::size_t p = 0; p < rgb.pixel_count(); ++p) {
    for (int c = 0; c < 3; ++c) rgb.data[p * 3 + c] = res.image.data[p];
  }
  return rgb;
}

}  // namespace

Raster enhance_view(Enhancer& enhancer, const RenderOutput& render, const EnhanceConfig& cfg, std::size_t step,
                    std::size_t steps) {
  EnhanceRequest inpaint;
  inpaint.stage = EnhanceStage::Inpaint;
  inpaint.image = render.color;
  inpaint.mask = opacity_mask(render.alpha, cfg.tau);
  inpaint.prompt = cfg.inpaint_prompt;
  inpaint.steps = cfg.steps;
  inpaint.t_min = t_min_at(cfg.inpaint_t_min_start, cfg.inpaint_t_min_end, step, steps);
  inpaint.t_max = cfg.t_max;
  const Raster inpainted = checked(enhancer.enhance(inpaint), inpaint.image, "inpaint");

  EnhanceRequest clean;
  clean.stage = EnhanceStage::Clean;
  clean.image = inpainted;
  clean.prompt = cfg.clean_prompt;
  clean.steps = cfg.steps;
  clean.image_guidance = cfg.image_guidance;
  clean.text_guidance = cfg.text_guidance;
  clean.t_min = t_min_at(cfg.clean_t_min_start, cfg.clean_t_min_end, step, steps);
  clean.t_max = cfg.t_max;
  return checked(enhancer.enhance(clean), clean.image, "clean");
}

}  // namespace sp360
