#include <gtest/gtest.h>

#include <fstream>
#include <mutex>

#include "outline_forge/image_io.hpp"
#include "outline_forge/pipeline.hpp"
#include "toy.hpp"

using namespace outline_forge;
namespace fs = std::filesystem;

namespace {

// Records every job it sees and answers like the mock.
class RecordingBackend final : public InpaintBackend {
 public:
  std::string id() const override { return "recording"; }
  InpaintResult inpaint(const InpaintJob& job) const override {
    std::lock_guard lock(mu_);
    jobs.push_back(job);
    return mock_inpaint(job);
  }
  mutable std::vector<InpaintJob> jobs;

 private:
  mutable std::mutex mu_;
};

class FailingBackend final : public InpaintBackend {
 public:
  explicit FailingBackend(ErrorKind kind) : kind_(kind) {}
  std::string id() const override { return "failing"; }
  InpaintResult inpaint(const InpaintJob&) const override { throw Error(kind_, "scripted"); }

 private:
  ErrorKind kind_;
};

class ShrinkingBackend final : public InpaintBackend {
 public:
  std::string id() const override { return "shrinking"; }
  InpaintResult inpaint(const InpaintJob&) const override { return {Image(8, 8), id(), 0}; }
};

AugmentationConfig mock_config() {
  AugmentationConfig cfg;
  cfg.backend = std::make_shared<MockBackend>();
  cfg.master_seed = 3;
  return cfg;
}

toy::Scene small_scene() {
  toy::Scene s;
  s.frames.push_back({160, 120, {{1, 20, 20, 50, 40}, {2, 90, 50, 40, 40, true}, {1, 100, 5, 30, 20}}});
  s.frames.push_back({96, 80, {{3, 10, 10, 60, 50, true}, {2, 70, 60, 6, 6}}});
  s.frames.push_back({64, 64, {{1, 0, 0, 64, 64, false, true}}});
  return s;
}

struct Loaded {
  toy::TempDir dir;
  DatasetIndex ds;
};

std::unique_ptr<Loaded> load(const toy::Scene& scene) {
  auto l = std::make_unique<Loaded>();
  toy::write_scene(scene, l->dir.path());
  l->ds = load_dataset(l->dir / "annotations.json");
  return l;
}

BinaryMask class_union(const DatasetIndex& ds, ObjectId image_id, std::span<const ObjectId> ids) {
  const ImageRecord& im = ds.image(image_id);
  BinaryMask m(im.width, im.height);
  for (std::size_t idx : ds.annotations_of(image_id)) {
    const Annotation& a = ds.annotations()[idx];
    if (std::find(ids.begin(), ids.end(), a.id) != ids.end()) m = mask_union(m, decode_annotation(a, im));
  }
  return m;
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

TEST(AugmentInstance, PixelsFarFromMaskAreUntouched) {
  const auto l = load(small_scene());
  const Image source = load_source_image(l->ds, 1, l->dir / "images");
  for (ObjectId cls : {1, 2}) {
    for (int v = 0; v < 3; ++v) {
      const auto cfg = mock_config();
      const InstanceOutcome out = augment_instance(l->ds, 1, cls, cfg, derive_task_seed(3, 1, cls, v), source, v);
      ASSERT_EQ(out.status, TaskStatus::Succeeded);
      const BinaryMask original = class_union(l->ds, 1, out.provenance.merged_annotation_ids);
      const BinaryMask far = toy::far_from(original, cfg.blend.radius());
      std::size_t changed_inside = 0;
      for (int y = 0; y < source.height(); ++y)
        for (int x = 0; x < source.width(); ++x) {
          if (far.get(x, y)) ASSERT_EQ(out.image.get(x, y), source.get(x, y)) << x << "," << y;
          if (out.image.get(x, y) != source.get(x, y)) changed_inside += original.get(x, y);
        }
      EXPECT_GT(changed_inside, 0u);
    }
  }
}

TEST(AugmentInstance, ProvenanceAndPrompt) {
  const auto l = load(small_scene());
  const Image source = load_source_image(l->ds, 1, l->dir / "images");
  auto cfg = mock_config();
  auto rec = std::make_shared<RecordingBackend>();
  cfg.backend = rec;
  cfg.use_negative = true;
  const InstanceOutcome out = augment_instance(l->ds, 1, 1, cfg, 99, source, 2);
  ASSERT_EQ(out.status, TaskStatus::Succeeded);
  ASSERT_EQ(rec->jobs.size(), 1u);
  EXPECT_EQ(rec->jobs[0].prompt.positive, "Photo of several dog");
  EXPECT_EQ(rec->jobs[0].prompt.negative, default_negative_prompt());
  EXPECT_EQ(rec->jobs[0].seed, 99u);
  EXPECT_EQ(rec->jobs[0].image.width(), 512);
  EXPECT_EQ(out.provenance.instance_count, 2);
  EXPECT_EQ(out.provenance.merged_annotation_ids, (std::vector<ObjectId>{1, 3}));
  EXPECT_EQ(out.provenance.variant_index, 2);
  EXPECT_EQ(out.provenance.erosion, 12);
  EXPECT_EQ(out.provenance.backend_id, "mock-v1");
}

TEST(AugmentInstance, PerInstanceRunsOneJobEach) {
  const auto l = load(small_scene());
  const Image source = load_source_image(l->ds, 1, l->dir / "images");
  auto cfg = mock_config();
  auto rec = std::make_shared<RecordingBackend>();
  cfg.backend = rec;
  cfg.merge_same_class = false;
  const InstanceOutcome out = augment_instance(l->ds, 1, 1, cfg, 5, source);
  ASSERT_EQ(out.status, TaskStatus::Succeeded);
  ASSERT_EQ(rec->jobs.size(), 2u);
  EXPECT_EQ(rec->jobs[0].prompt.positive, "Photo of a dog");
  EXPECT_NE(rec->jobs[0].seed, rec->jobs[1].seed);
  EXPECT_EQ(out.provenance.instance_count, 2);
}

TEST(AugmentInstance, KernelZeroInpaintsWholeMask) {
  toy::Scene s;
  s.frames.push_back({512, 512, {{2, 100, 120, 80, 60, true}}});
  const auto l = load(s);
  const Image source = load_source_image(l->ds, 1, l->dir / "images");
  auto cfg = mock_config();
  auto rec = std::make_shared<RecordingBackend>();
  cfg.backend = rec;
  cfg.erosion = {0};
  ASSERT_EQ(augment_instance(l->ds, 1, 2, cfg, 1, source).status, TaskStatus::Succeeded);
  ASSERT_EQ(rec->jobs.size(), 1u);
  EXPECT_EQ(rec->jobs[0].mask, decode_annotation(l->ds.annotations()[0], l->ds.image(1)));
  EXPECT_EQ(rec->jobs[0].image, source);
}

TEST(AugmentInstance, NoiseBackgroundOnlyChangesJobInput) {
  const auto l = load(small_scene());
  const Image source = load_source_image(l->ds, 1, l->dir / "images");
  auto cfg = mock_config();
  auto rec = std::make_shared<RecordingBackend>();
  cfg.backend = rec;
  cfg.noise_background = true;
  const InstanceOutcome out = augment_instance(l->ds, 1, 2, cfg, 5, source);
  ASSERT_EQ(out.status, TaskStatus::Succeeded);
  EXPECT_TRUE(out.provenance.noise_background);
  const BinaryMask original = class_union(l->ds, 1, out.provenance.merged_annotation_ids);
  const BinaryMask far = toy::far_from(original, cfg.blend.radius());
  for (int y = 0; y < source.height(); ++y)
    for (int x = 0; x < source.width(); ++x)
      if (far.get(x, y)) ASSERT_EQ(out.image.get(x, y), source.get(x, y));
}

TEST(AugmentInstance, Skips) {
  const auto l = load(small_scene());
  const Image source2 = load_source_image(l->ds, 2, l->dir / "images");
  auto cfg = mock_config();
  // the 6x6 cat disappears under a 12x12 kernel
  EXPECT_EQ(augment_instance(l->ds, 2, 2, cfg, 1, source2).status, TaskStatus::SkippedVanished);
  cfg.erosion = {3};
  EXPECT_EQ(augment_instance(l->ds, 2, 2, cfg, 1, source2).status, TaskStatus::Succeeded);
  cfg.min_area = {100};
  EXPECT_EQ(augment_instance(l->ds, 2, 2, cfg, 1, source2).status, TaskStatus::SkippedTooSmall);
  const Image source3 = load_source_image(l->ds, 3, l->dir / "images");
  EXPECT_EQ(augment_instance(l->ds, 3, 1, mock_config(), 1, source3).status, TaskStatus::SkippedTooSmall);
  const InstanceOutcome missing = augment_instance(l->ds, 2, 1, mock_config(), 1, source2);
  EXPECT_EQ(missing.status, TaskStatus::SkippedTooSmall);
  EXPECT_TRUE(missing.image.data().empty());
}

TEST(AugmentInstance, Errors) {
  const auto l = load(small_scene());
  const Image source = load_source_image(l->ds, 1, l->dir / "images");
  EXPECT_EQ(kind_of([&] { augment_instance(l->ds, 1, 1, mock_config(), 1, Image(10, 10)); }),
            ErrorKind::DimensionMismatch);
  auto cfg = mock_config();
  cfg.backend = std::make_shared<ShrinkingBackend>();
  EXPECT_EQ(kind_of([&] { augment_instance(l->ds, 1, 1, cfg, 1, source); }), ErrorKind::ProtocolViolation);
  cfg.backend = nullptr;
  EXPECT_EQ(kind_of([&] { augment_instance(l->ds, 1, 1, cfg, 1, source); }), ErrorKind::InvalidArgument);
}

TEST(PlanFullDataset, EligiblePairsTimesVariants) {
  const auto l = load(small_scene());
  const auto plan = plan_full_dataset(l->ds, {}, 2, 4);
  // image 1: classes 1, 2; image 2: classes 2, 3; image 3: crowd only
  ASSERT_EQ(plan.size(), 8u);
  EXPECT_EQ(plan[0].image_id, 1);
  EXPECT_EQ(plan[0].class_id, 1);
  EXPECT_EQ(plan[1].variant_index, 1);
  EXPECT_EQ(plan[7].class_id, 3);
  EXPECT_EQ(plan[7].seed, derive_task_seed(4, 2, 3, 1));
  EXPECT_EQ(plan_full_dataset(l->ds, {1000}, 1, 4).size(), 3u);
}

TEST(RunPlan, WritesDatasetImagesAndLog) {
  const auto l = load(small_scene());
  const auto plan = plan_full_dataset(l->ds, {}, 2, 4);
  toy::TempDir out;
  const RunReport report = run_plan(l->ds, plan, mock_config(), l->dir / "images", out.path());
  EXPECT_EQ(report.succeeded, 6u);
  EXPECT_EQ(report.skipped_vanished, 2u);
  EXPECT_EQ(report.failed, 0u);
  EXPECT_EQ(report.summary()["succeeded"], 6);

  const DatasetIndex aug = load_dataset(out / "annotations.json");
  EXPECT_EQ(aug.images().size(), 3u + 6u);
  ObjectId expect = 4;
  for (const auto& rec : report.records) {
    if (rec.status != TaskStatus::Succeeded) {
      EXPECT_FALSE(rec.new_image_id);
      continue;
    }
    ASSERT_TRUE(rec.new_image_id);
    EXPECT_EQ(*rec.new_image_id, expect++);
    const ImageRecord& im = aug.image(*rec.new_image_id);
    EXPECT_TRUE(fs::exists(out.path() / im.file_name)) << im.file_name;
    EXPECT_EQ(aug.annotations_of(im.id).size(), l->ds.annotations_of(rec.task.image_id).size());
    const Image img = read_image(out.path() / im.file_name);
    EXPECT_EQ(img.width(), im.width);
  }
  std::ifstream log(out / "run_log.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) {
    const auto j = Json::parse(line);
    EXPECT_TRUE(j.contains("status"));
    ++lines;
  }
  EXPECT_EQ(lines, plan.size());
}

TEST(RunPlan, SameSeedSameBytesAcrossWorkerCounts) {
  const auto l = load(small_scene());
  const auto plan = plan_full_dataset(l->ds, {}, 2, 4);
  toy::TempDir a, b;
  auto cfg = mock_config();
  run_plan(l->ds, plan, cfg, l->dir / "images", a.path());
  cfg.workers = 4;
  run_plan(l->ds, plan, cfg, l->dir / "images", b.path());
  EXPECT_EQ(toy::tree_hash(a.path(), {"run_log.jsonl"}), toy::tree_hash(b.path(), {"run_log.jsonl"}));
}

TEST(RunPlan, FailureBudget) {
  const auto l = load(small_scene());
  const auto plan = plan_full_dataset(l->ds, {}, 1, 4);
  auto cfg = mock_config();
  cfg.backend = std::make_shared<FailingBackend>(ErrorKind::BackendUnreachable);
  toy::TempDir out;
  EXPECT_EQ(kind_of([&] { run_plan(l->ds, plan, cfg, l->dir / "images", out.path()); }),
            ErrorKind::FailureBudgetExceeded);
  EXPECT_FALSE(fs::exists(out / "annotations.json"));
  EXPECT_TRUE(fs::exists(out / "run_log.jsonl"));

  cfg.failure_budget = 1.0;
  const RunReport r = run_plan(l->ds, plan, cfg, l->dir / "images", out.path());
  EXPECT_EQ(r.failed, 3u);
  EXPECT_EQ(r.skipped_vanished, 1u);
  EXPECT_EQ(load_dataset(out / "annotations.json").images().size(), 3u);
}

TEST(RunPlan, NonBackendErrorsAreFatal) {
  const auto l = load(small_scene());
  const auto plan = plan_full_dataset(l->ds, {}, 1, 4);
  auto cfg = mock_config();
  cfg.backend = std::make_shared<FailingBackend>(ErrorKind::Io);
  cfg.failure_budget = 1.0;
  toy::TempDir out;
  EXPECT_EQ(kind_of([&] { run_plan(l->ds, plan, cfg, l->dir / "images", out.path()); }), ErrorKind::Io);

  fs::remove(l->dir / "images" / "2.png");
  try {
    run_plan(l->ds, plan, mock_config(), l->dir / "images", out.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
    EXPECT_NE(std::string(e.what()).find("2.png"), std::string::npos);
  }
}

TEST(FidSampling, DeterministicDistinctNonCrowd) {
  const DatasetIndex ds = parse_dataset(toy::synthetic_coco80(40, 5).dump(), {false});
  for (const auto& im : ds.images()) {
    const auto a = sample_fid_annotations(ds, im.id, 2, 11);
    EXPECT_EQ(a, sample_fid_annotations(ds, im.id, 2, 11));
    std::size_t non_crowd = 0;
    for (std::size_t idx : ds.annotations_of(im.id)) non_crowd += !ds.annotations()[idx].iscrowd;
    EXPECT_EQ(a.size(), std::min<std::size_t>(2, non_crowd));
    if (a.size() == 2) EXPECT_NE(a[0], a[1]);
    for (ObjectId id : a)
      for (std::size_t idx : ds.annotations_of(im.id))
        if (ds.annotations()[idx].id == id) EXPECT_FALSE(ds.annotations()[idx].iscrowd);
  }
}

TEST(FidPrep, OutputsAndReversions) {
  toy::Scene s;
  s.frames.push_back({256, 256, {{1, 10, 10, 100, 80}, {2, 150, 150, 5, 5}}});   // one reversion
  s.frames.push_back({128, 96, {{3, 10, 10, 60, 50, true}, {1, 80, 20, 30, 30}, {2, 5, 70, 20, 20}}});
  s.frames.push_back({64, 64, {{1, 0, 0, 64, 64, false, true}}});
  s.frames.push_back({64, 64, {{1, 10, 10, 20, 20}}});
  const auto l = load(s);
  toy::TempDir out;
  FidPrepConfig cfg;
  const auto backend = std::make_shared<MockBackend>();
  const FidPrepResult r = fid_prep(l->ds, cfg, backend, l->dir / "images", out.path());
  ASSERT_EQ(r.entries.size(), 4u);
  EXPECT_EQ(r.entries[0].status, "ok");
  EXPECT_EQ(r.entries[0].masks.size(), 2u);
  EXPECT_EQ(r.reversions, 1u);
  EXPECT_EQ(r.entries[1].masks.size(), 2u);
  EXPECT_EQ(r.entries[2].status, "skipped");
  EXPECT_EQ(r.entries[3].masks.size(), 1u);
  EXPECT_EQ(r.short_images, 1u);
  for (const auto& e : r.entries) {
    if (e.status != "ok") continue;
    const Image real = read_image(out.path() / e.real_file), fake = read_image(out.path() / e.fake_file);
    EXPECT_EQ(real.width(), 256);
    EXPECT_EQ(fake.height(), 256);
    EXPECT_EQ(read_image(out.path() / e.work_fake_file).width(), 512);
    EXPECT_NE(real, fake);
  }
  const FidPrepResult back = load_fid_prep(out / "fidprep.json");
  EXPECT_EQ(back.reversions, 1u);
  EXPECT_EQ(back.entries.size(), 4u);
  EXPECT_EQ(back.entries[1].masks[0].bbox, r.entries[1].masks[0].bbox);
  EXPECT_EQ(Json::parse(toy::read_text(out / "fidprep.json"))["config"]["backend_id"], "mock-v1");

  const Json cut = write_local_cutouts(out.path());
  EXPECT_EQ(cut["cutouts"].size(), 5u);
  EXPECT_EQ(cut["skipped"], 0);
  for (const auto& c : cut["cutouts"]) {
    EXPECT_EQ(read_image(out.path() / c["real"].get<std::string>()).width(), 256);
    EXPECT_TRUE(fs::exists(out.path() / c["fake"].get<std::string>()));
  }
}

TEST(FidPrep, IdentityBackendGivesIdenticalSets) {
  toy::Scene s;
  s.frames.push_back({200, 150, {{1, 10, 10, 100, 80}, {2, 120, 60, 50, 50}}});
  const auto l = load(s);
  toy::TempDir out;
  const FidPrepResult r = fid_prep(l->ds, {}, std::make_shared<IdentityBackend>(), l->dir / "images", out.path());
  ASSERT_EQ(r.entries[0].status, "ok");
  EXPECT_EQ(read_file(out / r.entries[0].real_file), read_file(out / r.entries[0].fake_file));
}

TEST(FidPrep, FailureBudget) {
  toy::Scene s;
  s.frames.push_back({64, 64, {{1, 10, 10, 40, 40}}});
  const auto l = load(s);
  toy::TempDir out;
  const auto failing = std::make_shared<FailingBackend>(ErrorKind::BackendRejected);
  EXPECT_EQ(kind_of([&] { fid_prep(l->ds, {}, failing, l->dir / "images", out.path()); }),
            ErrorKind::FailureBudgetExceeded);
  FidPrepConfig cfg;
  cfg.failure_budget = 1;
  EXPECT_EQ(fid_prep(l->ds, cfg, failing, l->dir / "images", out.path()).failed, 1u);
}

TEST(Cutouts, BoxScalingAndGrowth) {
  const auto b = cutout_box({10, 20, 30, 40}, {100, 200}, {512, 512});
  ASSERT_TRUE(b);
  EXPECT_EQ(b->x, 51);  // floor(10 * 5.12)
  EXPECT_EQ(b->y, 51);  // floor(20 * 2.56)
  EXPECT_EQ(b->x + b->w, 205);  // ceil(40 * 5.12)
  EXPECT_EQ(b->y + b->h, 154);  // ceil(60 * 2.56)

  const auto tiny = cutout_box({50, 50, 1, 1}, {512, 512}, {512, 512});
  ASSERT_TRUE(tiny);
  EXPECT_EQ(tiny->w, 8);
  EXPECT_EQ(tiny->h, 8);
  EXPECT_EQ(tiny->x, 46);  // center 50.5, window starts at floor(46.5)

  const auto corner = cutout_box({0, 0, 1, 1}, {512, 512}, {512, 512});
  EXPECT_EQ(corner->x, 0);
  EXPECT_EQ(corner->w, 8);
  const auto edge = cutout_box({511, 511, 5, 5}, {512, 512}, {512, 512});
  EXPECT_EQ(edge->x, 504);
  EXPECT_FALSE(cutout_box({10, 10, 0, 5}, {512, 512}, {512, 512}));
  EXPECT_FALSE(cutout_box({600, 10, 5, 5}, {512, 512}, {512, 512}));
}

TEST(Cutouts, SkipsEmptyBoxes) {
  const Image a(64, 64, Rgb{1, 2, 3}), b(64, 64, Rgb{4, 5, 6});
  const std::vector<CutoutSource> src{{&a, &b, 1, {0, 0, 10, 10}, {64, 64}}, {&a, &b, 2, {0, 0, 0, 0}, {64, 64}}};
  std::size_t skipped = 0;
  const auto pairs = local_cutouts(src, {32, 32}, &skipped);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(skipped, 1u);
  EXPECT_EQ(pairs[0].real, Image(32, 32, Rgb{1, 2, 3}));
  EXPECT_EQ(pairs[0].fake, Image(32, 32, Rgb{4, 5, 6}));
  const Image c(10, 10);
  const std::vector<CutoutSource> bad{{&a, &c, 1, {0, 0, 1, 1}, {64, 64}}};
  EXPECT_THROW(local_cutouts(bad), Error);
}

TEST(Preview, SheetLayout) {
  const auto l = load(small_scene());
  const Image source = load_source_image(l->ds, 1, l->dir / "images");
  const Image sheet = render_preview(l->ds, 1, 1, mock_config(), source, 3, 64);
  EXPECT_EQ(sheet.width(), 64 * 5);
  EXPECT_EQ(sheet.height(), 64);
  EXPECT_NE(crop(sheet, {128, 0, 64, 64}), crop(sheet, {192, 0, 64, 64}));
  const Image source2 = load_source_image(l->ds, 2, l->dir / "images");
  EXPECT_THROW(render_preview(l->ds, 2, 2, mock_config(), source2, 1, 64), Error);
}
