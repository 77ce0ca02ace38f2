#include "outline_forge/fewshot.hpp"

#include <algorithm>
#include <set>

#include "outline_forge/random.hpp"

namespace outline_forge {

FoldAssignment parse_fold_assignment(std::string_view name) {
  if (name == "modulo") return FoldAssignment::Modulo;
  if (name == "contiguous") return FoldAssignment::Contiguous;
  throw Error(ErrorKind::InvalidArgument, "fold assignment must be modulo or contiguous, got \"" +
                                              std::string(name) + "\"");
}

std::string_view to_string(FoldAssignment a) {
  return a == FoldAssignment::Modulo ? "modulo" : "contiguous";
}

std::array<FoldSpec, kFoldCount> make_folds(std::span<const ObjectId> category_ids, FoldAssignment assignment) {
  std::vector<ObjectId> sorted(category_ids.begin(), category_ids.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorKind::InvalidArgument, "duplicate category ids");
  if (sorted.empty() || sorted.size() % kFoldCount != 0)
    throw Error(ErrorKind::NotDivisible,
                std::to_string(sorted.size()) + " categories cannot be split into " + std::to_string(kFoldCount) +
                    " equal folds");
  const std::size_t per_fold = sorted.size() / kFoldCount;
  std::array<FoldSpec, kFoldCount> folds;
  for (int f = 0; f < kFoldCount; ++f) {
    folds[f].fold_index = f;
    folds[f].assignment = assignment;
  }
  for (std::size_t rank = 0; rank < sorted.size(); ++rank) {
    const std::size_t f = assignment == FoldAssignment::Modulo ? rank % kFoldCount : rank / per_fold;
    folds[f].class_ids.push_back(sorted[rank]);
  }
  return folds;
}

std::vector<ObjectId> complement_classes(std::span<const ObjectId> category_ids, const FoldSpec& fold) {
  const std::set<ObjectId> in_fold(fold.class_ids.begin(), fold.class_ids.end());
  std::vector<ObjectId> out;
  for (auto id : category_ids)
    if (!in_fold.contains(id)) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ObjectId> eligible_images(const DatasetIndex& ds, ObjectId class_id, const AreaFilter& filter) {
  if (filter.min_area < 0) throw Error(ErrorKind::InvalidArgument, "min_area must be >= 0");
  std::set<ObjectId> ids;
  for (const auto& a : ds.annotations())
    if (a.category_id == class_id && filter.passes(a)) ids.insert(a.image_id);
  return {ids.begin(), ids.end()};
}

SupportSet sample_support(const DatasetIndex& ds, const FoldSpec& fold, int shots, const AreaFilter& filter,
                          std::uint64_t seed) {
  if (shots < 1) throw Error(ErrorKind::InvalidArgument, "shots must be >= 1");
  SupportSet support{fold, shots, {}, seed, filter};
  for (ObjectId class_id : fold.class_ids) {
    std::vector<ObjectId> pool = eligible_images(ds, class_id, filter);
    if (pool.size() < static_cast<std::size_t>(shots))
      throw Error(ErrorKind::InsufficientImages, "class " + std::to_string(class_id) + " has " +
                                                     std::to_string(pool.size()) + " eligible images, " +
                                                     std::to_string(shots) + " required");
    Rng rng(stable_hash({seed, static_cast<std::uint64_t>(class_id)}));
    for (std::size_t i = 0; i < static_cast<std::size_t>(shots); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      support.entries.push_back({pool[i], class_id});
    }
  }
  return support;
}

std::uint64_t derive_task_seed(std::uint64_t master_seed, ObjectId image_id, ObjectId class_id, int variant_index) {
  return stable_hash({master_seed, static_cast<std::uint64_t>(image_id), static_cast<std::uint64_t>(class_id),
                      static_cast<std::uint64_t>(variant_index)});
}

std::vector<AugmentationTask> plan_augmentation(std::span<const SupportEntry> entries, int added,
                                                std::uint64_t master_seed) {
  if (added < 0) throw Error(ErrorKind::InvalidArgument, "added must be >= 0");
  std::vector<AugmentationTask> plan;
  if (added == 0) return plan;
  if (entries.empty()) throw Error(ErrorKind::InvalidArgument, "cannot plan augmentation over an empty support set");
  plan.reserve(static_cast<std::size_t>(added));
  for (std::size_t i = 0; i < static_cast<std::size_t>(added); ++i) {
    const auto& e = entries[i % entries.size()];
    const int variant = static_cast<int>(i / entries.size());
    plan.push_back({i, e.image_id, e.class_id, variant, derive_task_seed(master_seed, e.image_id, e.class_id, variant)});
  }
  return plan;
}

std::vector<AugmentationTask> plan_augmentation(const SupportSet& support, int added, std::uint64_t master_seed) {
  return plan_augmentation(std::span<const SupportEntry>(support.entries), added, master_seed);
}

Json support_set_to_json(const SupportSet& s) {
  Json entries = Json::array();
  for (const auto& e : s.entries) entries.push_back({{"image_id", e.image_id}, {"class_id", e.class_id}});
  return {{"fold", s.fold.fold_index},
          {"assignment", to_string(s.fold.assignment)},
          {"class_ids", s.fold.class_ids},
          {"shots", s.shots},
          {"min_area", s.filter.min_area},
          {"seed", s.seed},
          {"entries", std::move(entries)}};
}

}  // namespace outline_forge
