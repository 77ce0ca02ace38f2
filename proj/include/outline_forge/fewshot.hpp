#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "outline_forge/coco.hpp"

namespace outline_forge {

enum class FoldAssignment { Modulo, Contiguous };

FoldAssignment parse_fold_assignment(std::string_view name);
std::string_view to_string(FoldAssignment a);

struct FoldSpec {
  int fold_index = 0;
  std::vector<ObjectId> class_ids;
  FoldAssignment assignment = FoldAssignment::Modulo;
};

inline constexpr int kFoldCount = 4;

// Categories are ranked by sorted id. Modulo sends rank r to fold r % 4;
// contiguous sends ranks [n/4 f, n/4 (f+1)) to fold f.
std::array<FoldSpec, kFoldCount> make_folds(std::span<const ObjectId> category_ids, FoldAssignment assignment);

// Classes not in the fold, used for base training.
std::vector<ObjectId> complement_classes(std::span<const ObjectId> category_ids, const FoldSpec& fold);

struct AreaFilter {
  double min_area = 0.0;

  bool passes(const Annotation& a) const { return !a.iscrowd && a.area >= min_area; }
};

struct SupportEntry {
  ObjectId image_id = 0;
  ObjectId class_id = 0;
  friend bool operator==(const SupportEntry&, const SupportEntry&) = default;
};

struct SupportSet {
  FoldSpec fold;
  int shots = 0;
  std::vector<SupportEntry> entries;  // grouped by class in fold order
  std::uint64_t seed = 0;
  AreaFilter filter;
};

// Images holding at least one non-crowd annotation of `class_id` that
// passes the filter, ascending by id.
std::vector<ObjectId> eligible_images(const DatasetIndex& ds, ObjectId class_id, const AreaFilter& filter);

SupportSet sample_support(const DatasetIndex& ds, const FoldSpec& fold, int shots, const AreaFilter& filter,
                          std::uint64_t seed);

struct AugmentationTask {
  std::size_t task_id = 0;
  ObjectId image_id = 0;
  ObjectId class_id = 0;
  int variant_index = 0;
  std::uint64_t seed = 0;
};

std::uint64_t derive_task_seed(std::uint64_t master_seed, ObjectId image_id, ObjectId class_id, int variant_index);

// Round-robin over the support entries, so variant counts per entry differ
// by at most one.
std::vector<AugmentationTask> plan_augmentation(const SupportSet& support, int added, std::uint64_t master_seed);
std::vector<AugmentationTask> plan_augmentation(std::span<const SupportEntry> entries, int added,
                                                std::uint64_t master_seed);

Json support_set_to_json(const SupportSet& s);

}  // namespace outline_forge
