#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "outline_forge/backend.hpp"
#include "outline_forge/coco.hpp"
#include "outline_forge/compositor.hpp"
#include "outline_forge/fewshot.hpp"
#include "outline_forge/imageops.hpp"
#include "outline_forge/maskops.hpp"
#include "outline_forge/prompts.hpp"

namespace outline_forge {

struct AugmentationConfig {
  SquareKernel erosion{12};
  AreaFilter min_area;
  BlendParams blend;
  PromptTemplate prompt_template = PromptTemplate::photo();
  bool use_negative = false;
  std::string negative_prompt;  // empty = built-in negative prompt
  BackendHandle backend;
  std::uint64_t master_seed = 0;
  int workers = 1;
  bool noise_background = false;
  // Same-class annotations share one job; false runs one job per annotation.
  bool merge_same_class = true;
  std::size_t min_inner_pixels = 1;
  int steps = 50;
  double guidance_scale = 7.5;
  PadFill pad_fill = PadFill::EdgeReplicate;
  double failure_budget = 0.01;  // fraction of tasks allowed to fail on backend errors
};

enum class TaskStatus { Succeeded, SkippedVanished, SkippedTooSmall, Failed };
std::string_view to_string(TaskStatus s);

struct InstanceOutcome {
  TaskStatus status = TaskStatus::Succeeded;
  Image image;  // full source resolution; empty unless Succeeded
  Provenance provenance;
  std::string message;
};

// Erode, frame to the model resolution, inpaint, blend back and paste into
// the source geometry. Backend errors propagate.
InstanceOutcome augment_instance(const DatasetIndex& ds, ObjectId image_id, ObjectId class_id,
                                 const AugmentationConfig& cfg, std::uint64_t variant_seed, const Image& source,
                                 int variant_index = 0);

struct TaskRecord {
  AugmentationTask task;
  TaskStatus status = TaskStatus::Succeeded;
  std::string message;
  std::optional<ObjectId> new_image_id;
  std::string file_name;
  Provenance provenance;
  std::int64_t elapsed_ms = 0;
};

struct RunReport {
  std::size_t succeeded = 0;
  std::size_t skipped_vanished = 0;
  std::size_t skipped_small = 0;
  std::size_t failed = 0;
  std::vector<TaskRecord> records;  // in task order
  std::filesystem::path dataset_path;

  Json summary() const;
};

// Output layout under out_dir:
//   annotations.json   base dataset plus augmented images
//   images/            augmented PNGs (file_name in annotations.json)
//   run_log.jsonl      one record per task
RunReport run_plan(const DatasetIndex& ds, std::span<const AugmentationTask> plan, const AugmentationConfig& cfg,
                   const std::filesystem::path& image_root, const std::filesystem::path& out_dir);

// Every (image, class) pair with an eligible annotation, `variants` times.
std::vector<AugmentationTask> plan_full_dataset(const DatasetIndex& ds, const AreaFilter& filter, int variants,
                                                std::uint64_t master_seed);

Image load_source_image(const DatasetIndex& ds, ObjectId image_id, const std::filesystem::path& image_root);

struct FidPrepConfig {
  int masks_per_image = 2;
  SquareKernel erosion{12};
  Size work_resolution{512, 512};
  Size output_resolution{256, 256};
  std::uint64_t seed = 0;
  std::size_t min_inner_pixels = 1;
  PromptTemplate prompt_template = PromptTemplate::photo();
  bool use_negative = false;
  int steps = 50;
  double guidance_scale = 7.5;
  int workers = 1;
  double failure_budget = 0.01;
};

struct SampledMask {
  ObjectId annotation_id = 0;
  ObjectId class_id = 0;
  bool reverted = false;  // erosion vanished, original mask used
  std::array<double, 4> bbox{};  // source-image coordinates
};

struct FidPrepEntry {
  ObjectId image_id = 0;
  Size source;
  std::vector<SampledMask> masks;
  std::string status;  // "ok", "skipped", "failed"
  std::string message;
  std::string real_file;   // relative to out_dir, output resolution
  std::string fake_file;
  std::string work_real_file;  // working resolution, used for cutouts
  std::string work_fake_file;
};

struct FidPrepResult {
  std::vector<FidPrepEntry> entries;  // in dataset image order
  std::size_t reversions = 0;
  std::size_t short_images = 0;  // fewer annotations than masks_per_image
  std::size_t failed = 0;

  Json to_json() const;
};

// Non-crowd annotations sampled for one image; deterministic in (seed, image id).
std::vector<ObjectId> sample_fid_annotations(const DatasetIndex& ds, ObjectId image_id, int count,
                                             std::uint64_t seed);

// Writes real/, fake/, work/real/, work/fake/ and fidprep.json under out_dir.
// Set B is the raw backend output with no overlay of the original.
FidPrepResult fid_prep(const DatasetIndex& ds, const FidPrepConfig& cfg, const BackendHandle& backend,
                       const std::filesystem::path& image_root, const std::filesystem::path& out_dir);
FidPrepResult load_fid_prep(const std::filesystem::path& fidprep_json);

// Scales a source-frame box into a frame of `frame` size, rounding outward,
// clamping, and growing to at least min_size centered. nullopt when empty.
std::optional<BBox> cutout_box(const std::array<double, 4>& bbox, Size source, Size frame, int min_size = 8);

struct CutoutSource {
  const Image* original = nullptr;
  const Image* inpainted = nullptr;
  ObjectId annotation_id = 0;
  std::array<double, 4> bbox{};
  Size bbox_frame;
};

struct CutoutPair {
  ObjectId annotation_id = 0;
  BBox box;
  Image real;
  Image fake;
};

std::vector<CutoutPair> local_cutouts(std::span<const CutoutSource> sources, Size output = {256, 256},
                                      std::size_t* skipped = nullptr);

// Writes cutouts/real, cutouts/fake and cutouts.json next to a fid-prep run.
Json write_local_cutouts(const std::filesystem::path& fidprep_dir, Size output = {256, 256});

// Tiles: masked input, eroded-mask overlay, then one per variant.
Image render_preview(const DatasetIndex& ds, ObjectId image_id, ObjectId class_id, const AugmentationConfig& cfg,
                     const Image& source, int variants, int tile = 256);

}  // namespace outline_forge
