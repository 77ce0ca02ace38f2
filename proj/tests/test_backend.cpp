#include <gtest/gtest.h>

#include <atomic>
#include <deque>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "outline_forge/backend.hpp"
#include "outline_forge/image_io.hpp"
#include "toy.hpp"

using namespace outline_forge;
using nlohmann::json;

namespace {

json fixture(const std::string& name) {
  return json::parse(toy::read_text(std::string(FIXTURE_DIR) + "/protocol/" + name));
}

InpaintJob golden_job() {
  InpaintJob job;
  job.image = Image(512, 512, Rgb{120, 130, 140});
  job.mask = BinaryMask(512, 512);
  for (int y = 200; y < 300; ++y)
    for (int x = 200; x < 300; ++x) job.mask.set(x, y);
  job.prompt = {"Photo of a dog", ""};
  job.seed = 7;
  return job;
}

// In-process stand-in for the inference service.
class FakeService {
 public:
  // Statuses to answer with, in order; once exhausted every request succeeds.
  std::deque<int> script;
  Size reply_size{512, 512};
  std::atomic<int> requests{0};
  std::atomic<int> in_flight{0};
  std::atomic<int> max_in_flight{0};
  std::chrono::milliseconds delay{0};

  FakeService() {
    server_.Post("/v1/inpaint", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests;
      const int now = ++in_flight;
      int seen = max_in_flight.load();
      while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(delay);
      handle(req, res);
      --in_flight;
    });
    server_.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(fixture("health.json").dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeService() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    int status = 200;
    {
      std::lock_guard lock(mu_);
      if (!script.empty()) {
        status = script.front();
        script.pop_front();
      }
    }
    if (status != 200) {
      res.status = status;
      res.set_content(json{{"error", "scripted failure"}}.dump(), "application/json");
      return;
    }
    const json body = json::parse(req.body);
    for (const char* field : {"image_png_b64", "mask_png_b64", "prompt", "negative_prompt", "seed", "steps",
                              "guidance_scale"}) {
      if (!body.contains(field)) {
        res.status = 400;
        res.set_content(json{{"error", std::string("missing field: ") + field}}.dump(), "application/json");
        return;
      }
    }
    Image img = decode_image(base64_decode(body["image_png_b64"].get<std::string>()));
    if (reply_size.w != img.width() || reply_size.h != img.height()) img = Image(reply_size.w, reply_size.h);
    // invert so the caller can tell the reply apart from its input
    for (auto& b : img.data()) b = static_cast<std::uint8_t>(255 - b);
    res.set_content(json{{"image_png_b64", base64_encode(encode_png(img))}, {"backend_id", "fake-sd"}}.dump(),
                    "application/json");
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
};

HttpBackendOptions fast(const std::string& url) {
  HttpBackendOptions o;
  o.base_url = url;
  o.initial_backoff = std::chrono::milliseconds(5);
  o.max_attempts = 3;
  o.timeout = std::chrono::seconds(20);
  return o;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Io;
}

}  // namespace

TEST(Protocol, RequestMatchesGolden) {
  const json golden = fixture("inpaint_request.json");
  const json req = make_inpaint_request(golden_job());
  for (const char* key : {"prompt", "negative_prompt", "seed", "steps", "guidance_scale"})
    EXPECT_EQ(req[key], golden[key]) << key;
  EXPECT_EQ(req.size(), golden.size());
  EXPECT_EQ(decode_image(base64_decode(req["image_png_b64"].get<std::string>())),
            decode_image(base64_decode(golden["image_png_b64"].get<std::string>())));
  EXPECT_EQ(decode_mask_png(base64_decode(req["mask_png_b64"].get<std::string>())),
            decode_mask_png(base64_decode(golden["mask_png_b64"].get<std::string>())));
}

TEST(Protocol, GoldenResponseParses) {
  const InpaintResult r = parse_inpaint_response(fixture("inpaint_response.json"), {512, 512});
  EXPECT_EQ(r.image, Image(512, 512, Rgb{10, 20, 30}));
  EXPECT_EQ(r.backend_id, "golden-model");
  EXPECT_EQ(kind_of([] { parse_inpaint_response(fixture("inpaint_response.json"), {256, 256}); }),
            ErrorKind::ProtocolViolation);
  EXPECT_EQ(kind_of([] { parse_inpaint_response(json{{"image_png_b64", "!!!"}}, {512, 512}); }),
            ErrorKind::ProtocolViolation);
  EXPECT_EQ(kind_of([] { parse_inpaint_response(fixture("error_missing_mask.json"), {512, 512}); }),
            ErrorKind::ProtocolViolation);
}

TEST(Validate, Preconditions) {
  InpaintJob job = golden_job();
  EXPECT_NO_THROW(validate_job(job));
  job.mask = BinaryMask(512, 512);
  EXPECT_EQ(kind_of([&] { validate_job(job); }), ErrorKind::PreconditionViolation);
  job = golden_job();
  job.image = Image(511, 512);
  EXPECT_EQ(kind_of([&] { validate_job(job); }), ErrorKind::PreconditionViolation);
  job = golden_job();
  job.steps = 0;
  EXPECT_EQ(kind_of([&] { validate_job(job); }), ErrorKind::PreconditionViolation);
}

TEST(Mock, DeterministicAndSeedSensitive) {
  MockBackend mock;
  const InpaintJob job = golden_job();
  const auto a = mock.inpaint(job), b = mock.inpaint(job);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.backend_id, "mock-v1");
  InpaintJob other = job;
  other.seed = 8;
  EXPECT_NE(mock.inpaint(other).image, a.image);
}

TEST(Mock, MaskedPixelsNearBandMeanUnmaskedNearInput) {
  const InpaintJob job = golden_job();
  const Image out = MockBackend{}.inpaint(job).image;
  for (int y = 0; y < 512; y += 3)
    for (int x = 0; x < 512; x += 3)
      for (int c = 0; c < 3; ++c) {
        const int in = job.image.get(x, y)[c], got = out.get(x, y)[c];
        ASSERT_LE(std::abs(got - in), job.mask.get(x, y) ? 8 : 1);
      }
}

TEST(Identity, ReturnsInput) {
  const InpaintJob job = golden_job();
  EXPECT_EQ(IdentityBackend{}.inpaint(job).image, job.image);
}

TEST(MakeBackend, Specs) {
  EXPECT_EQ(make_backend("mock")->id(), "mock-v1");
  EXPECT_EQ(make_backend("identity")->id(), "identity");
  EXPECT_EQ(make_backend("http://localhost:1")->id(), "http:http://localhost:1");
  EXPECT_EQ(kind_of([] { make_backend("https://x"); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { make_backend("gpu"); }), ErrorKind::InvalidArgument);
  ::setenv("OUTLINE_FORGE_BACKEND_URL", "mock", 1);
  EXPECT_EQ(make_backend("")->id(), "mock-v1");
  ::unsetenv("OUTLINE_FORGE_BACKEND_URL");
  EXPECT_EQ(kind_of([] { make_backend(""); }), ErrorKind::InvalidArgument);
}

TEST(Http, RoundTrip) {
  FakeService svc;
  HttpBackend backend(fast(svc.url()));
  const InpaintJob job = golden_job();
  const InpaintResult r = backend.inpaint(job);
  EXPECT_EQ(r.image, Image(512, 512, Rgb{135, 125, 115}));
  EXPECT_EQ(r.backend_id, "fake-sd");
  EXPECT_EQ(svc.requests.load(), 1);
  const HealthStatus h = backend.health();
  EXPECT_EQ(h.status, "ok");
  EXPECT_FALSE(h.model.empty());
}

TEST(Http, RetriesOnBusy) {
  FakeService svc;
  svc.script = {503, 503};
  HttpBackend backend(fast(svc.url()));
  EXPECT_NO_THROW(backend.inpaint(golden_job()));
  EXPECT_EQ(svc.requests.load(), 3);
}

TEST(Http, GivesUpAfterMaxAttempts) {
  FakeService svc;
  svc.script = {503, 503, 503, 503};
  HttpBackend backend(fast(svc.url()));
  EXPECT_EQ(kind_of([&] { backend.inpaint(golden_job()); }), ErrorKind::BackendUnreachable);
  EXPECT_EQ(svc.requests.load(), 3);
}

TEST(Http, ClientErrorIsNotRetried) {
  FakeService svc;
  svc.script = {400};
  HttpBackend backend(fast(svc.url()));
  EXPECT_EQ(kind_of([&] { backend.inpaint(golden_job()); }), ErrorKind::BackendRejected);
  EXPECT_EQ(svc.requests.load(), 1);
  svc.script = {500};
  EXPECT_EQ(kind_of([&] { backend.inpaint(golden_job()); }), ErrorKind::BackendRejected);
}

TEST(Http, WrongReplySizeIsProtocolViolation) {
  FakeService svc;
  svc.reply_size = {256, 256};
  HttpBackend backend(fast(svc.url()));
  EXPECT_EQ(kind_of([&] { backend.inpaint(golden_job()); }), ErrorKind::ProtocolViolation);
}

TEST(Http, UnreachableHost) {
  httplib::Server probe;
  const int port = probe.bind_to_any_port("127.0.0.1");
  probe.stop();
  HttpBackend backend(fast("http://127.0.0.1:" + std::to_string(port)));
  EXPECT_EQ(kind_of([&] { backend.inpaint(golden_job()); }), ErrorKind::BackendUnreachable);
  EXPECT_EQ(kind_of([&] { backend.health(); }), ErrorKind::BackendUnreachable);
}

TEST(Http, InFlightIsBounded) {
  FakeService svc;
  svc.delay = std::chrono::milliseconds(60);
  HttpBackendOptions o = fast(svc.url());
  o.max_in_flight = 2;
  HttpBackend backend(o);
  const InpaintJob job = golden_job();
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i) threads.emplace_back([&] { backend.inpaint(job); });
  for (auto& t : threads) t.join();
  EXPECT_EQ(svc.requests.load(), 6);
  EXPECT_LE(svc.max_in_flight.load(), 2);
}

TEST(Http, OptionsValidated) {
  EXPECT_THROW(HttpBackend(HttpBackendOptions{}), Error);
  HttpBackendOptions o = fast("http://x");
  o.max_attempts = 0;
  EXPECT_THROW(HttpBackend{o}, Error);
}

TEST(Http, ServiceRejectsMissingField) {
  FakeService svc;
  httplib::Client client(svc.url());
  json req = fixture("inpaint_request.json");
  req.erase("mask_png_b64");
  auto res = client.Post("/v1/inpaint", req.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body), fixture("error_missing_mask.json"));
}
