#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "json.hpp"
#include "outline_forge/mask.hpp"

namespace outline_forge {

using Json = nlohmann::json;
using ObjectId = std::int64_t;

// One polygon is a flat list x0,y0,x1,y1,... in pixel coordinates where
// pixel (i,j) covers [i,i+1)x[j,j+1).
using Polygon = std::vector<double>;
using Polygons = std::vector<Polygon>;

// COCO uncompressed RLE: column-major, runs alternate starting with zeros.
struct UncompressedRle {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const UncompressedRle&, const UncompressedRle&) = default;
};

using SegEncoding = std::variant<Polygons, UncompressedRle>;

struct ImageRecord {
  ObjectId id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  std::vector<std::string> captions;
};

struct Annotation {
  ObjectId id = 0;
  ObjectId image_id = 0;
  ObjectId category_id = 0;
  SegEncoding segmentation;
  // The segmentation exactly as read, so copies re-serialize byte-identically.
  Json raw_segmentation;
  double area = 0.0;
  std::array<double, 4> bbox{};
  bool iscrowd = false;
};

struct Category {
  ObjectId id = 0;
  std::string name;
};

struct ParseOptions {
  // Decode every mask and check stored area and bbox against it.
  bool verify_geometry = true;
};

// Immutable once built; safe to share across threads.
class DatasetIndex {
 public:
  DatasetIndex() = default;
  DatasetIndex(std::vector<ImageRecord> images, std::vector<Annotation> annotations,
               std::vector<Category> categories, Json extra = Json::object(),
               const ParseOptions& options = {});

  const std::vector<ImageRecord>& images() const { return images_; }
  const std::vector<Annotation>& annotations() const { return annotations_; }
  const std::vector<Category>& categories() const { return categories_; }
  // Top-level keys other than images/annotations/categories (info, licenses, ...).
  const Json& extra() const { return extra_; }

  const ImageRecord& image(ObjectId id) const;
  bool has_image(ObjectId id) const { return image_pos_.contains(id); }
  const std::vector<std::size_t>& annotations_of(ObjectId image_id) const;
  const Category& category(ObjectId id) const;
  bool has_category(ObjectId id) const { return category_pos_.contains(id); }

  ObjectId max_image_id() const;
  ObjectId max_annotation_id() const;

 private:
  std::vector<ImageRecord> images_;
  std::vector<Annotation> annotations_;
  std::vector<Category> categories_;
  Json extra_;
  std::unordered_map<ObjectId, std::size_t> image_pos_;
  std::unordered_map<ObjectId, std::size_t> category_pos_;
  std::unordered_map<ObjectId, std::vector<std::size_t>> by_image_;
};

DatasetIndex parse_dataset(std::string_view json_text, const ParseOptions& options = {});
DatasetIndex load_dataset(const std::filesystem::path& path, const ParseOptions& options = {});

BinaryMask decode_mask(const SegEncoding& seg, int width, int height);
BinaryMask decode_annotation(const Annotation& ann, const ImageRecord& image);
UncompressedRle encode_rle(const BinaryMask& mask);

// COCO's LEB128-style compressed counts string.
UncompressedRle decompress_rle_string(std::string_view counts, int height, int width);
std::string compress_rle(const UncompressedRle& rle);

// Per-image record of how an augmented image was produced.
struct Provenance {
  ObjectId class_id = 0;
  int erosion = 0;
  std::string prompt;
  std::string negative_prompt;
  std::uint64_t seed = 0;
  std::string backend_id;
  int instance_count = 0;
  int variant_index = 0;
  std::vector<ObjectId> merged_annotation_ids;
  bool noise_background = false;
};

Json provenance_to_json(const Provenance& p);

struct NewImage {
  ImageRecord record;
  ObjectId source_image_id = 0;
  Provenance provenance;
};

Json dataset_to_json(const DatasetIndex& ds);

// Builds the augmented dataset JSON: base plus each new image carrying
// copies of its source's annotations under fresh ids.
Json build_augmented_dataset(const DatasetIndex& base, std::span<const NewImage> new_images);

std::filesystem::path write_augmented_dataset(const DatasetIndex& base,
                                              std::span<const NewImage> new_images,
                                              const std::filesystem::path& out);

}  // namespace outline_forge
