#include "outline_forge/backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "outline_forge/image_io.hpp"
#include "outline_forge/maskops.hpp"
#include "outline_forge/random.hpp"

namespace outline_forge {

using nlohmann::json;

namespace {

constexpr int kMockBand = 8;
constexpr int kMockNoise = 8;

std::int64_t elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
}

Rgb mean_color(const Image& image, const BinaryMask* where) {
  std::uint64_t sum[3] = {0, 0, 0};
  std::uint64_t n = 0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      if (where && !where->get(x, y)) continue;
      const auto* p = image.px(x, y);
      for (int c = 0; c < 3; ++c) sum[c] += p[c];
      ++n;
    }
  if (n == 0) return {0, 0, 0};
  Rgb out;
  for (int c = 0; c < 3; ++c) out[c] = static_cast<std::uint8_t>((sum[c] + n / 2) / n);
  return out;
}

std::uint8_t clamp_byte(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

}  // namespace

void validate_job(const InpaintJob& job, Size resolution) {
  if (job.image.width() != resolution.w || job.image.height() != resolution.h)
    throw Error(ErrorKind::PreconditionViolation,
                "job image must be " + std::to_string(resolution.w) + "x" + std::to_string(resolution.h));
  if (!job.image.same_dims(job.mask))
    throw Error(ErrorKind::PreconditionViolation, "job mask size differs from image");
  if (!job.mask.any()) throw Error(ErrorKind::PreconditionViolation, "job mask is empty");
  if (job.steps < 1) throw Error(ErrorKind::PreconditionViolation, "steps must be >= 1");
}

InpaintResult mock_inpaint(const InpaintJob& job) {
  const auto start = std::chrono::steady_clock::now();
  const BinaryMask band = mask_and_not(dilate(job.mask, SquareKernel{2 * kMockBand + 1}), job.mask);
  const Rgb base = band.any() ? mean_color(job.image, &band) : mean_color(job.image, nullptr);
  const std::uint64_t lossy_seed = stable_hash({job.seed, 0x10557ULL});

  Image out = job.image;
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const std::uint64_t idx = static_cast<std::uint64_t>(y) * out.width() + x;
      auto* p = out.px(x, y);
      if (job.mask.get(x, y)) {
        const std::uint64_t h = stable_hash({job.seed, idx});
        for (int c = 0; c < 3; ++c) {
          const int noise = static_cast<int>((h >> (16 * c)) % (2 * kMockNoise + 1)) - kMockNoise;
          p[c] = clamp_byte(base[c] + noise);
        }
      } else {
        const std::uint64_t h = stable_hash({lossy_seed, idx});
        for (int c = 0; c < 3; ++c) {
          const int delta = static_cast<int>((h >> (16 * c)) % 3) - 1;
          p[c] = clamp_byte(p[c] + delta);
        }
      }
    }
  return {std::move(out), "mock-v1", elapsed_ms(start)};
}

InpaintResult MockBackend::inpaint(const InpaintJob& job) const {
  validate_job(job);
  return mock_inpaint(job);
}

InpaintResult IdentityBackend::inpaint(const InpaintJob& job) const {
  validate_job(job);
  return {job.image, id(), 0};
}

json make_inpaint_request(const InpaintJob& job) {
  return {{"image_png_b64", base64_encode(encode_png(job.image))},
          {"mask_png_b64", base64_encode(encode_mask_png(job.mask))},
          {"prompt", job.prompt.positive},
          {"negative_prompt", job.prompt.negative},
          {"seed", job.seed},
          {"steps", job.steps},
          {"guidance_scale", job.guidance_scale}};
}

InpaintResult parse_inpaint_response(const json& body, Size expected) {
  if (!body.is_object() || !body.contains("image_png_b64") || !body["image_png_b64"].is_string())
    throw Error(ErrorKind::ProtocolViolation, "response lacks image_png_b64");
  InpaintResult result;
  try {
    result.image = decode_image(base64_decode(body["image_png_b64"].get<std::string>()));
  } catch (const Error& e) {
    throw Error(ErrorKind::ProtocolViolation, std::string("undecodable image payload: ") + e.what());
  }
  if (result.image.width() != expected.w || result.image.height() != expected.h)
    throw Error(ErrorKind::ProtocolViolation,
                "backend returned " + std::to_string(result.image.width()) + "x" +
                    std::to_string(result.image.height()) + ", expected " + std::to_string(expected.w) + "x" +
                    std::to_string(expected.h));
  result.backend_id = body.value("backend_id", std::string{});
  return result;
}

HttpBackend::HttpBackend(HttpBackendOptions options)
    : options_(std::move(options)), slots_(std::clamp(options_.max_in_flight, 1, 1024)) {
  if (options_.base_url.empty()) throw Error(ErrorKind::InvalidArgument, "backend URL is empty");
  if (options_.max_attempts < 1) throw Error(ErrorKind::InvalidArgument, "max_attempts must be >= 1");
}

InpaintResult HttpBackend::inpaint(const InpaintJob& job) const {
  validate_job(job);
  const std::string body = make_inpaint_request(job).dump();
  const auto start = std::chrono::steady_clock::now();

  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};

  auto backoff = options_.initial_backoff;
  std::string last_failure;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    httplib::Client client(options_.base_url);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    auto res = client.Post("/v1/inpaint", body, "application/json");

    if (res && res->status == 200) {
      json parsed;
      try {
        parsed = json::parse(res->body);
      } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ProtocolViolation, std::string("response is not JSON: ") + e.what());
      }
      InpaintResult result = parse_inpaint_response(parsed, {job.image.width(), job.image.height()});
      if (result.backend_id.empty()) result.backend_id = id();
      result.latency_ms = elapsed_ms(start);
      return result;
    }

    if (res && res->status != 503) {
      std::string message = res->body;
      try {
        message = json::parse(res->body).value("error", res->body);
      } catch (const json::exception&) {
      }
      throw Error(ErrorKind::BackendRejected, "status " + std::to_string(res->status) + ": " + message);
    }

    last_failure = res ? "status 503 (busy)" : httplib::to_string(res.error());
    if (attempt < options_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<std::int64_t>(std::llround(backoff.count() * options_.backoff_factor)));
    }
  }
  throw Error(ErrorKind::BackendUnreachable, options_.base_url + " after " +
                                                 std::to_string(options_.max_attempts) +
                                                 " attempts: " + last_failure);
}

HealthStatus HttpBackend::health() const {
  httplib::Client client(options_.base_url);
  client.set_connection_timeout(std::chrono::seconds(10));
  auto res = client.Get("/v1/health");
  if (!res) throw Error(ErrorKind::BackendUnreachable, options_.base_url + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error(ErrorKind::BackendRejected, "health check returned status " + std::to_string(res->status));
  try {
    const json j = json::parse(res->body);
    return {j.at("status").get<std::string>(), j.value("model", std::string{})};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ProtocolViolation, std::string("bad health response: ") + e.what());
  }
}

BackendHandle make_backend(std::string_view spec, const HttpBackendOptions& http) {
  std::string s(spec);
  if (s.empty()) {
    if (const char* env = std::getenv("OUTLINE_FORGE_BACKEND_URL")) s = env;
  }
  if (s.empty())
    throw Error(ErrorKind::InvalidArgument, "no backend given and OUTLINE_FORGE_BACKEND_URL is unset");
  if (s == "mock") return std::make_shared<MockBackend>();
  if (s == "identity") return std::make_shared<IdentityBackend>();
  if (s.starts_with("http://")) {
    HttpBackendOptions opts = http;
    opts.base_url = s;
    return std::make_shared<HttpBackend>(std::move(opts));
  }
  throw Error(ErrorKind::InvalidArgument, "unknown backend \"" + s + "\"");
}

}  // namespace outline_forge
