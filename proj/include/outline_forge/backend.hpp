#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>

#include "json.hpp"
#include "outline_forge/image.hpp"
#include "outline_forge/imageops.hpp"
#include "outline_forge/mask.hpp"
#include "outline_forge/prompts.hpp"

namespace outline_forge {

struct InpaintJob {
  Image image;
  BinaryMask mask;  // set = region to inpaint
  PromptSpec prompt;
  std::uint64_t seed = 0;
  int steps = 50;
  double guidance_scale = 7.5;
};

struct InpaintResult {
  Image image;
  std::string backend_id;
  std::int64_t latency_ms = 0;
};

// Throws PreconditionViolation unless image and mask are `resolution` sized
// and the mask has at least one pixel.
void validate_job(const InpaintJob& job, Size resolution = kModelResolution);

class InpaintBackend {
 public:
  virtual ~InpaintBackend() = default;
  virtual std::string id() const = 0;
  // The returned image covers the whole frame; unmasked pixels are not
  // guaranteed to survive.
  virtual InpaintResult inpaint(const InpaintJob& job) const = 0;
};

using BackendHandle = std::shared_ptr<const InpaintBackend>;

// Deterministic stand-in for a diffusion model. Masked pixels get the mean
// color of the 8px band around the mask plus noise in [-8, 8]; unmasked
// pixels are perturbed by at most 1 to imitate a lossy latent round trip.
InpaintResult mock_inpaint(const InpaintJob& job);

class MockBackend final : public InpaintBackend {
 public:
  std::string id() const override { return "mock-v1"; }
  InpaintResult inpaint(const InpaintJob& job) const override;
};

// Returns the input image untouched.
class IdentityBackend final : public InpaintBackend {
 public:
  std::string id() const override { return "identity"; }
  InpaintResult inpaint(const InpaintJob& job) const override;
};

struct HttpBackendOptions {
  std::string base_url;  // e.g. http://localhost:8000
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{250};
  double backoff_factor = 2.0;
  int max_in_flight = 4;
  std::chrono::seconds timeout{600};
};

struct HealthStatus {
  std::string status;
  std::string model;
};

// Client for the inference service:
//   POST /v1/inpaint  {image_png_b64, mask_png_b64, prompt, negative_prompt,
//                      seed, steps, guidance_scale}
//     -> 200 {image_png_b64, backend_id} | 4xx/5xx {error}
//   GET  /v1/health   -> {status, model}
// Connection failures and 503 are retried with exponential backoff.
class HttpBackend final : public InpaintBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options);

  std::string id() const override { return "http:" + options_.base_url; }
  InpaintResult inpaint(const InpaintJob& job) const override;
  HealthStatus health() const;

 private:
  HttpBackendOptions options_;
  mutable std::counting_semaphore<1024> slots_;
};

nlohmann::json make_inpaint_request(const InpaintJob& job);
// Throws ProtocolViolation on undecodable payloads or size mismatch.
InpaintResult parse_inpaint_response(const nlohmann::json& body, Size expected);

// "mock", "identity", or an http:// URL. An empty spec falls back to the
// OUTLINE_FORGE_BACKEND_URL environment variable.
BackendHandle make_backend(std::string_view spec, const HttpBackendOptions& http = {});

}  // namespace outline_forge
