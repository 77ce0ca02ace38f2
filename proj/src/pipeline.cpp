#include "outline_forge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "outline_forge/image_io.hpp"
#include "outline_forge/random.hpp"

namespace outline_forge {

namespace fs = std::filesystem;

std::string_view to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::Succeeded: return "succeeded";
    case TaskStatus::SkippedVanished: return "skipped_vanished";
    case TaskStatus::SkippedTooSmall: return "skipped_small";
    case TaskStatus::Failed: return "failed";
  }
  return "?";
}

namespace {

bool is_backend_error(const Error& e) {
  return e.kind() == ErrorKind::BackendUnreachable || e.kind() == ErrorKind::BackendRejected ||
         e.kind() == ErrorKind::ProtocolViolation;
}

// Runs fn(i) for i in [0, n) on `workers` threads. The exception of the
// lowest failing index is rethrown after all threads finish.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(body);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct ClassMasks {
  std::vector<ObjectId> ids;
  std::vector<BinaryMask> masks;
  BinaryMask merged;
};

// Non-crowd annotations of the class that pass the area filter, in file order.
ClassMasks collect_class_masks(const DatasetIndex& ds, const ImageRecord& im, ObjectId class_id,
                               const AreaFilter& filter) {
  ClassMasks out;
  out.merged = BinaryMask(im.width, im.height);
  for (std::size_t idx : ds.annotations_of(im.id)) {
    const Annotation& a = ds.annotations()[idx];
    if (a.category_id != class_id || !filter.passes(a)) continue;
    out.ids.push_back(a.id);
    out.masks.push_back(decode_annotation(a, im));
    out.merged = mask_union(out.merged, out.masks.back());
  }
  return out;
}

std::string class_name(const DatasetIndex& ds, ObjectId class_id) {
  const std::string& name = ds.category(class_id).name;
  return name.empty() ? std::to_string(class_id) : name;
}

PromptSpec prompt_for(const AugmentationConfig& cfg, const std::string& name, int count) {
  return build_prompt(name, count, cfg.prompt_template, cfg.use_negative, cfg.negative_prompt);
}

std::string task_file_name(const AugmentationTask& t) {
  return "aug_" + std::to_string(t.image_id) + "_" + std::to_string(t.class_id) + "_" +
         std::to_string(t.variant_index) + ".png";
}

Json record_to_json(const TaskRecord& r) {
  Json j = {{"task_id", r.task.task_id},
            {"image_id", r.task.image_id},
            {"class_id", r.task.class_id},
            {"variant_index", r.task.variant_index},
            {"seed", r.task.seed},
            {"status", to_string(r.status)},
            {"elapsed_ms", r.elapsed_ms}};
  if (!r.message.empty()) j["message"] = r.message;
  if (r.new_image_id) {
    j["new_image_id"] = *r.new_image_id;
    j["file_name"] = r.file_name;
    j["provenance"] = provenance_to_json(r.provenance);
  }
  return j;
}

}  // namespace

InstanceOutcome augment_instance(const DatasetIndex& ds, ObjectId image_id, ObjectId class_id,
                                 const AugmentationConfig& cfg, std::uint64_t variant_seed, const Image& source,
                                 int variant_index) {
  if (!cfg.backend) throw Error(ErrorKind::InvalidArgument, "augmentation config has no backend");
  const ImageRecord& im = ds.image(image_id);
  if (source.width() != im.width || source.height() != im.height)
    throw Error(ErrorKind::DimensionMismatch, "image " + std::to_string(image_id) + " on disk is " +
                                                  std::to_string(source.width()) + "x" +
                                                  std::to_string(source.height()) + ", annotation says " +
                                                  std::to_string(im.width) + "x" + std::to_string(im.height));
  InstanceOutcome outcome;
  outcome.provenance.class_id = class_id;
  outcome.provenance.erosion = cfg.erosion.side;
  outcome.provenance.seed = variant_seed;
  outcome.provenance.variant_index = variant_index;
  outcome.provenance.noise_background = cfg.noise_background;

  ClassMasks cm = collect_class_masks(ds, im, class_id, cfg.min_area);
  if (cm.ids.empty()) {
    outcome.status = TaskStatus::SkippedTooSmall;
    outcome.message = "no non-crowd annotation of class " + std::to_string(class_id) + " with area >= " +
                      std::to_string(cfg.min_area.min_area);
    return outcome;
  }

  // Each job: the original mask (for framing and noise) and its indices.
  std::vector<std::vector<std::size_t>> jobs;
  if (cfg.merge_same_class) {
    jobs.emplace_back();
    for (std::size_t i = 0; i < cm.ids.size(); ++i) jobs.back().push_back(i);
  } else {
    for (std::size_t i = 0; i < cm.ids.size(); ++i) jobs.push_back({i});
  }

  const std::string name = class_name(ds, class_id);
  Image current = source;
  std::size_t done = 0;
  for (const auto& members : jobs) {
    BinaryMask original(im.width, im.height);
    for (std::size_t i : members) original = mask_union(original, cm.masks[i]);
    const OutlineBand band = split_outline(original, cfg.erosion);
    if (is_vanished(band.inner, cfg.min_inner_pixels)) continue;

    const CanvasPlan plan = plan_canvas({im.width, im.height}, *bbox_of(original), kModelResolution);
    auto [canvas, canvas_original] = apply_canvas(current, original, plan, cfg.pad_fill);
    const BinaryMask canvas_inner = apply_canvas(band.inner, plan);
    if (is_vanished(canvas_inner, cfg.min_inner_pixels)) continue;

    const std::uint64_t job_seed =
        cfg.merge_same_class ? variant_seed : stable_hash({variant_seed, static_cast<std::uint64_t>(cm.ids[members[0]])});
    InpaintJob job;
    job.image = cfg.noise_background ? replace_background_with_noise(canvas, canvas_original, stable_hash({job_seed, 0xb6ULL}))
                                     : canvas;
    job.mask = canvas_inner;
    job.prompt = prompt_for(cfg, name, static_cast<int>(members.size()));
    job.seed = job_seed;
    job.steps = cfg.steps;
    job.guidance_scale = cfg.guidance_scale;

    const InpaintResult result = cfg.backend->inpaint(job);
    if (result.image.width() != canvas.width() || result.image.height() != canvas.height())
      throw Error(ErrorKind::ProtocolViolation, "backend result size differs from job");
    const Image composed = compose(canvas, result.image, canvas_inner, cfg.blend);
    current = invert_canvas(composed, plan, current);

    outcome.provenance.prompt = job.prompt.positive;
    outcome.provenance.negative_prompt = job.prompt.negative;
    outcome.provenance.backend_id = result.backend_id;
    outcome.provenance.instance_count += static_cast<int>(members.size());
    for (std::size_t i : members) outcome.provenance.merged_annotation_ids.push_back(cm.ids[i]);
    ++done;
  }

  if (done == 0) {
    outcome.status = TaskStatus::SkippedVanished;
    outcome.message = "eroded mask vanished with kernel " + std::to_string(cfg.erosion.side);
    return outcome;
  }
  outcome.image = std::move(current);
  return outcome;
}

Image load_source_image(const DatasetIndex& ds, ObjectId image_id, const fs::path& image_root) {
  const ImageRecord& im = ds.image(image_id);
  const fs::path path = image_root / im.file_name;
  if (!fs::exists(path)) throw Error(ErrorKind::Io, "missing image file " + path.string());
  return read_image(path);
}

std::vector<AugmentationTask> plan_full_dataset(const DatasetIndex& ds, const AreaFilter& filter, int variants,
                                                std::uint64_t master_seed) {
  if (variants < 0) throw Error(ErrorKind::InvalidArgument, "variants must be >= 0");
  std::vector<AugmentationTask> plan;
  for (const auto& im : ds.images()) {
    std::set<ObjectId> classes;
    for (std::size_t idx : ds.annotations_of(im.id)) {
      const Annotation& a = ds.annotations()[idx];
      if (filter.passes(a)) classes.insert(a.category_id);
    }
    for (ObjectId c : classes)
      for (int v = 0; v < variants; ++v)
        plan.push_back({plan.size(), im.id, c, v, derive_task_seed(master_seed, im.id, c, v)});
  }
  return plan;
}

Json RunReport::summary() const {
  return {{"succeeded", succeeded},
          {"skipped_vanished", skipped_vanished},
          {"skipped_small", skipped_small},
          {"failed", failed},
          {"dataset", dataset_path.string()}};
}

RunReport run_plan(const DatasetIndex& ds, std::span<const AugmentationTask> plan, const AugmentationConfig& cfg,
                   const fs::path& image_root, const fs::path& out_dir) {
  if (cfg.workers < 1) throw Error(ErrorKind::InvalidArgument, "workers must be >= 1");
  fs::create_directories(out_dir / "images");

  RunReport report;
  report.records.resize(plan.size());
  parallel_for(plan.size(), cfg.workers, [&](std::size_t i) {
    const AugmentationTask& task = plan[i];
    TaskRecord& rec = report.records[i];
    rec.task = task;
    const auto start = std::chrono::steady_clock::now();
    const Image source = load_source_image(ds, task.image_id, image_root);
    try {
      InstanceOutcome out = augment_instance(ds, task.image_id, task.class_id, cfg, task.seed, source, task.variant_index);
      rec.status = out.status;
      rec.message = std::move(out.message);
      rec.provenance = std::move(out.provenance);
      if (out.status == TaskStatus::Succeeded) {
        rec.file_name = task_file_name(task);
        write_png(out_dir / "images" / rec.file_name, out.image);
      }
    } catch (const Error& e) {
      if (!is_backend_error(e)) throw;
      rec.status = TaskStatus::Failed;
      rec.message = e.what();
    }
    rec.elapsed_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  });

  std::vector<NewImage> new_images;
  ObjectId next_id = ds.max_image_id() + 1;
  for (auto& rec : report.records) {
    switch (rec.status) {
      case TaskStatus::Succeeded: {
        ++report.succeeded;
        rec.new_image_id = next_id++;
        const ImageRecord& src = ds.image(rec.task.image_id);
        ImageRecord record{*rec.new_image_id, "images/" + rec.file_name, src.width, src.height, src.captions};
        rec.file_name = record.file_name;
        new_images.push_back({std::move(record), src.id, rec.provenance});
        break;
      }
      case TaskStatus::SkippedVanished: ++report.skipped_vanished; break;
      case TaskStatus::SkippedTooSmall: ++report.skipped_small; break;
      case TaskStatus::Failed: ++report.failed; break;
    }
  }

  {
    std::ofstream log(out_dir / "run_log.jsonl", std::ios::trunc);
    if (!log) throw Error(ErrorKind::Io, "cannot write run log in " + out_dir.string());
    for (const auto& rec : report.records) log << record_to_json(rec).dump() << '\n';
  }
  for (const auto& rec : report.records)
    if (rec.status != TaskStatus::Succeeded)
      std::cerr << "task " << rec.task.task_id << " (image " << rec.task.image_id << ", class " << rec.task.class_id
                << "): " << to_string(rec.status) << (rec.message.empty() ? "" : ": " + rec.message) << '\n';

  const double allowed = cfg.failure_budget * static_cast<double>(plan.size());
  if (static_cast<double>(report.failed) > allowed)
    throw Error(ErrorKind::FailureBudgetExceeded, std::to_string(report.failed) + " of " +
                                                      std::to_string(plan.size()) +
                                                      " tasks failed on backend errors");

  report.dataset_path = write_augmented_dataset(ds, new_images, out_dir / "annotations.json");
  return report;
}

// ---------------------------------------------------------------------------
// FID preparation

std::vector<ObjectId> sample_fid_annotations(const DatasetIndex& ds, ObjectId image_id, int count,
                                             std::uint64_t seed) {
  std::vector<ObjectId> pool;
  for (std::size_t idx : ds.annotations_of(image_id)) {
    const Annotation& a = ds.annotations()[idx];
    if (!a.iscrowd) pool.push_back(a.id);
  }
  std::sort(pool.begin(), pool.end());
  const std::size_t k = std::min(pool.size(), static_cast<std::size_t>(std::max(count, 0)));
  Rng rng(stable_hash({seed, static_cast<std::uint64_t>(image_id), 0xf1dULL}));
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + static_cast<std::size_t>(rng.below(pool.size() - i))]);
  pool.resize(k);
  return pool;
}

namespace {

Json entry_to_json(const FidPrepEntry& e) {
  Json masks = Json::array();
  for (const auto& m : e.masks)
    masks.push_back({{"annotation_id", m.annotation_id},
                     {"class_id", m.class_id},
                     {"reverted", m.reverted},
                     {"bbox", m.bbox}});
  Json j = {{"image_id", e.image_id},
            {"source_size", {e.source.w, e.source.h}},
            {"masks", std::move(masks)},
            {"status", e.status}};
  if (!e.message.empty()) j["message"] = e.message;
  if (e.status == "ok") {
    j["real"] = e.real_file;
    j["fake"] = e.fake_file;
    j["work_real"] = e.work_real_file;
    j["work_fake"] = e.work_fake_file;
  }
  return j;
}

FidPrepEntry entry_from_json(const Json& j) {
  FidPrepEntry e;
  e.image_id = j.at("image_id").get<ObjectId>();
  e.source = {j.at("source_size")[0].get<int>(), j.at("source_size")[1].get<int>()};
  for (const auto& m : j.at("masks"))
    e.masks.push_back({m.at("annotation_id").get<ObjectId>(), m.at("class_id").get<ObjectId>(),
                       m.at("reverted").get<bool>(), m.at("bbox").get<std::array<double, 4>>()});
  e.status = j.at("status").get<std::string>();
  e.message = j.value("message", std::string{});
  e.real_file = j.value("real", std::string{});
  e.fake_file = j.value("fake", std::string{});
  e.work_real_file = j.value("work_real", std::string{});
  e.work_fake_file = j.value("work_fake", std::string{});
  return e;
}

}  // namespace

Json FidPrepResult::to_json() const {
  Json entries_json = Json::array();
  for (const auto& e : entries) entries_json.push_back(entry_to_json(e));
  return {{"entries", std::move(entries_json)},
          {"reversions", reversions},
          {"short_images", short_images},
          {"failed", failed}};
}

FidPrepResult fid_prep(const DatasetIndex& ds, const FidPrepConfig& cfg, const BackendHandle& backend,
                       const fs::path& image_root, const fs::path& out_dir) {
  if (cfg.masks_per_image < 1) throw Error(ErrorKind::InvalidArgument, "masks_per_image must be >= 1");
  if (!backend) throw Error(ErrorKind::InvalidArgument, "fid-prep needs a backend");
  for (const char* sub : {"real", "fake", "work/real", "work/fake"}) fs::create_directories(out_dir / sub);

  FidPrepResult result;
  result.entries.resize(ds.images().size());
  AugmentationConfig prompt_cfg;
  prompt_cfg.prompt_template = cfg.prompt_template;
  prompt_cfg.use_negative = cfg.use_negative;

  parallel_for(ds.images().size(), cfg.workers, [&](std::size_t i) {
    const ImageRecord& im = ds.images()[i];
    FidPrepEntry& entry = result.entries[i];
    entry.image_id = im.id;
    entry.source = {im.width, im.height};

    const std::vector<ObjectId> sampled = sample_fid_annotations(ds, im.id, cfg.masks_per_image, cfg.seed);
    if (sampled.empty()) {
      entry.status = "skipped";
      entry.message = "no non-crowd annotations";
      return;
    }

    const Image source = load_source_image(ds, im.id, image_root);
    if (source.width() != im.width || source.height() != im.height)
      throw Error(ErrorKind::DimensionMismatch, "image " + std::to_string(im.id) + " size differs from its record");
    const Image work = resize(source, cfg.work_resolution, ResizeMode::Bilinear);

    BinaryMask job_mask(cfg.work_resolution.w, cfg.work_resolution.h);
    std::map<ObjectId, int> class_counts;
    std::vector<ObjectId> class_order;
    for (ObjectId ann_id : sampled) {
      const Annotation* ann = nullptr;
      for (std::size_t idx : ds.annotations_of(im.id))
        if (ds.annotations()[idx].id == ann_id) ann = &ds.annotations()[idx];
      const BinaryMask original = resize(decode_annotation(*ann, im), cfg.work_resolution);
      BinaryMask inner = erode(original, cfg.erosion);
      SampledMask sm{ann_id, ann->category_id, false, ann->bbox};
      if (is_vanished(inner, cfg.min_inner_pixels)) {
        inner = original;
        sm.reverted = true;
      }
      job_mask = mask_union(job_mask, inner);
      entry.masks.push_back(sm);
      if (class_counts[ann->category_id]++ == 0) class_order.push_back(ann->category_id);
    }

    if (!job_mask.any()) {
      entry.status = "skipped";
      entry.message = "sampled masks are empty at working resolution";
      return;
    }

    std::string positive, negative;
    for (ObjectId c : class_order) {
      const PromptSpec p = prompt_for(prompt_cfg, class_name(ds, c), class_counts[c]);
      positive += (positive.empty() ? "" : ", ") + p.positive;
      negative = p.negative;
    }

    InpaintJob job{work, job_mask, {positive, negative}, stable_hash({cfg.seed, static_cast<std::uint64_t>(im.id)}),
                   cfg.steps, cfg.guidance_scale};
    InpaintResult raw;
    try {
      raw = backend->inpaint(job);
    } catch (const Error& e) {
      if (!is_backend_error(e)) throw;
      entry.status = "failed";
      entry.message = e.what();
      return;
    }

    const std::string name = std::to_string(im.id) + ".png";
    entry.work_real_file = "work/real/" + name;
    entry.work_fake_file = "work/fake/" + name;
    entry.real_file = "real/" + name;
    entry.fake_file = "fake/" + name;
    write_png(out_dir / entry.work_real_file, work);
    write_png(out_dir / entry.work_fake_file, raw.image);
    write_png(out_dir / entry.real_file, resize(work, cfg.output_resolution));
    write_png(out_dir / entry.fake_file, resize(raw.image, cfg.output_resolution));
    entry.status = "ok";
  });

  for (const auto& e : result.entries) {
    for (const auto& m : e.masks) result.reversions += m.reverted ? 1 : 0;
    if (!e.masks.empty() && e.masks.size() < static_cast<std::size_t>(cfg.masks_per_image)) {
      ++result.short_images;
      std::cerr << "image " << e.image_id << ": only " << e.masks.size() << " annotation(s) available\n";
    }
    if (e.status == "failed") ++result.failed;
    if (e.status != "ok") std::cerr << "image " << e.image_id << ": " << e.status << ": " << e.message << '\n';
  }

  Json j = result.to_json();
  j["config"] = {{"masks_per_image", cfg.masks_per_image},
                 {"erosion", cfg.erosion.side},
                 {"work_resolution", {cfg.work_resolution.w, cfg.work_resolution.h}},
                 {"output_resolution", {cfg.output_resolution.w, cfg.output_resolution.h}},
                 {"seed", cfg.seed},
                 {"backend_id", backend->id()}};
  write_file(out_dir / "fidprep.json", j.dump(1));

  if (static_cast<double>(result.failed) > cfg.failure_budget * static_cast<double>(ds.images().size()))
    throw Error(ErrorKind::FailureBudgetExceeded,
                std::to_string(result.failed) + " images failed on backend errors");
  return result;
}

FidPrepResult load_fid_prep(const fs::path& fidprep_json) {
  const Bytes bytes = read_file(fidprep_json);
  try {
    const Json j = Json::parse(bytes.begin(), bytes.end());
    FidPrepResult r;
    for (const auto& e : j.at("entries")) r.entries.push_back(entry_from_json(e));
    r.reversions = j.value("reversions", std::size_t{0});
    r.short_images = j.value("short_images", std::size_t{0});
    r.failed = j.value("failed", std::size_t{0});
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::MalformedJson, fidprep_json.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Local cutouts

std::optional<BBox> cutout_box(const std::array<double, 4>& bbox, Size source, Size frame, int min_size) {
  if (source.w <= 0 || source.h <= 0) return std::nullopt;
  const double sx = static_cast<double>(frame.w) / source.w;
  const double sy = static_cast<double>(frame.h) / source.h;
  int x0 = static_cast<int>(std::floor(bbox[0] * sx));
  int y0 = static_cast<int>(std::floor(bbox[1] * sy));
  int x1 = static_cast<int>(std::ceil((bbox[0] + bbox[2]) * sx));
  int y1 = static_cast<int>(std::ceil((bbox[1] + bbox[3]) * sy));
  x0 = std::clamp(x0, 0, frame.w);
  x1 = std::clamp(x1, 0, frame.w);
  y0 = std::clamp(y0, 0, frame.h);
  y1 = std::clamp(y1, 0, frame.h);
  if (x1 <= x0 || y1 <= y0 || bbox[2] <= 0 || bbox[3] <= 0) return std::nullopt;

  auto grow = [min_size](int& lo, int& hi, int limit) {
    const int want = std::min(min_size, limit);
    if (hi - lo >= want) return;
    const int center2 = lo + hi;  // twice the center
    lo = std::clamp((center2 - want) / 2, 0, limit - want);
    hi = lo + want;
  };
  grow(x0, x1, frame.w);
  grow(y0, y1, frame.h);
  return BBox{x0, y0, x1 - x0, y1 - y0};
}

std::vector<CutoutPair> local_cutouts(std::span<const CutoutSource> sources, Size output, std::size_t* skipped) {
  std::vector<CutoutPair> out;
  for (const auto& s : sources) {
    if (!s.original || !s.inpainted || !s.original->same_dims(*s.inpainted))
      throw Error(ErrorKind::DimensionMismatch, "cutout pair images differ in size");
    const Size frame{s.original->width(), s.original->height()};
    const auto box = cutout_box(s.bbox, s.bbox_frame, frame);
    if (!box) {
      std::cerr << "annotation " << s.annotation_id << ": empty bbox, cutout skipped\n";
      if (skipped) ++*skipped;
      continue;
    }
    out.push_back({s.annotation_id, *box, resize(crop(*s.original, *box), output),
                   resize(crop(*s.inpainted, *box), output)});
  }
  return out;
}

Json write_local_cutouts(const fs::path& fidprep_dir, Size output) {
  const FidPrepResult prep = load_fid_prep(fidprep_dir / "fidprep.json");
  fs::create_directories(fidprep_dir / "cutouts" / "real");
  fs::create_directories(fidprep_dir / "cutouts" / "fake");
  Json listing = Json::array();
  std::size_t skipped = 0;
  for (const auto& e : prep.entries) {
    if (e.status != "ok") continue;
    const Image real = read_image(fidprep_dir / e.work_real_file);
    const Image fake = read_image(fidprep_dir / e.work_fake_file);
    std::vector<CutoutSource> sources;
    for (const auto& m : e.masks) sources.push_back({&real, &fake, m.annotation_id, m.bbox, e.source});
    for (const auto& pair : local_cutouts(sources, output, &skipped)) {
      const std::string name = std::to_string(e.image_id) + "_" + std::to_string(pair.annotation_id) + ".png";
      write_png(fidprep_dir / "cutouts" / "real" / name, pair.real);
      write_png(fidprep_dir / "cutouts" / "fake" / name, pair.fake);
      listing.push_back({{"image_id", e.image_id},
                         {"annotation_id", pair.annotation_id},
                         {"box", {pair.box.x, pair.box.y, pair.box.w, pair.box.h}},
                         {"real", "cutouts/real/" + name},
                         {"fake", "cutouts/fake/" + name}});
    }
  }
  Json j = {{"cutouts", listing}, {"skipped", skipped}};
  write_file(fidprep_dir / "cutouts.json", j.dump(1));
  return j;
}

// ---------------------------------------------------------------------------
// Preview sheet

namespace {

Image tint(const Image& image, const BinaryMask& where, Rgb color) {
  Image out = image;
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      if (!where.get(x, y)) continue;
      auto* p = out.px(x, y);
      for (int c = 0; c < 3; ++c) p[c] = static_cast<std::uint8_t>((p[c] + color[c] + 1) / 2);
    }
  return out;
}

void blit(Image& sheet, const Image& tile, int x0) {
  for (int y = 0; y < tile.height(); ++y)
    for (int x = 0; x < tile.width(); ++x) sheet.set(x0 + x, y, tile.get(x, y));
}

}  // namespace

Image render_preview(const DatasetIndex& ds, ObjectId image_id, ObjectId class_id, const AugmentationConfig& cfg,
                     const Image& source, int variants, int tile) {
  if (variants < 0 || tile < 1) throw Error(ErrorKind::InvalidArgument, "bad preview layout");
  const ImageRecord& im = ds.image(image_id);
  const ClassMasks cm = collect_class_masks(ds, im, class_id, cfg.min_area);
  if (cm.ids.empty())
    throw Error(ErrorKind::InvalidArgument, "image " + std::to_string(image_id) + " has no eligible annotation of class " +
                                                std::to_string(class_id));
  const OutlineBand band = split_outline(cm.merged, cfg.erosion);
  const CanvasPlan plan = plan_canvas({im.width, im.height}, *bbox_of(cm.merged), kModelResolution);
  auto [canvas, canvas_mask] = apply_canvas(source, cm.merged, plan, cfg.pad_fill);
  const BinaryMask canvas_inner = apply_canvas(band.inner, plan);

  Image sheet(tile * (2 + variants), tile);
  blit(sheet, resize(tint(canvas, canvas_mask, {255, 0, 0}), {tile, tile}), 0);
  blit(sheet, resize(tint(canvas, canvas_inner, {0, 0, 255}), {tile, tile}), tile);
  for (int v = 0; v < variants; ++v) {
    const std::uint64_t seed = derive_task_seed(cfg.master_seed, image_id, class_id, v);
    const InstanceOutcome out = augment_instance(ds, image_id, class_id, cfg, seed, source, v);
    if (out.status != TaskStatus::Succeeded)
      throw Error(ErrorKind::InvalidArgument, "preview variant skipped: " + out.message);
    blit(sheet, resize(apply_canvas(out.image, plan, cfg.pad_fill), {tile, tile}), tile * (2 + v));
  }
  return sheet;
}

}  // namespace outline_forge
