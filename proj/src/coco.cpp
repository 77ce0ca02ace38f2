#include "outline_forge/coco.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "outline_forge/image_io.hpp"

namespace outline_forge {

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorKind::MalformedJson, what);
}

template <class T>
T required(const Json& j, const char* key, const char* where) {
  auto it = j.find(key);
  if (it == j.end()) malformed(std::string(where) + " missing \"" + key + "\"");
  try {
    return it->get<T>();
  } catch (const Json::exception& e) {
    malformed(std::string(where) + " field \"" + key + "\": " + e.what());
  }
}

UncompressedRle rle_from_json(const Json& seg) {
  if (!seg.contains("size") || !seg["size"].is_array() || seg["size"].size() != 2)
    malformed("RLE segmentation needs size [h, w]");
  UncompressedRle rle;
  rle.height = seg["size"][0].get<int>();
  rle.width = seg["size"][1].get<int>();
  const Json& counts = required<Json>(seg, "counts", "RLE segmentation");
  if (counts.is_string()) return decompress_rle_string(counts.get<std::string>(), rle.height, rle.width);
  if (!counts.is_array()) malformed("RLE counts must be a list or string");
  rle.counts.reserve(counts.size());
  for (const auto& c : counts) {
    if (!c.is_number_integer() || c.get<long long>() < 0) malformed("RLE count must be a nonnegative integer");
    rle.counts.push_back(c.get<std::uint32_t>());
  }
  return rle;
}

SegEncoding segmentation_from_json(const Json& seg) {
  if (seg.is_object()) return rle_from_json(seg);
  if (!seg.is_array()) malformed("segmentation must be a polygon list or RLE object");
  Polygons polys;
  for (const auto& poly : seg) {
    if (!poly.is_array()) malformed("polygon must be a list of coordinates");
    Polygon p;
    p.reserve(poly.size());
    for (const auto& v : poly) {
      if (!v.is_number()) malformed("polygon coordinate must be numeric");
      p.push_back(v.get<double>());
    }
    polys.push_back(std::move(p));
  }
  return polys;
}

// Even-odd fill sampled at pixel centers; union over polygons.
void rasterize_polygon(const Polygon& flat, BinaryMask& out) {
  if (flat.size() % 2 != 0 || flat.size() < 6)
    throw Error(ErrorKind::DegeneratePolygon,
                "polygon needs at least 3 vertices, got " + std::to_string(flat.size() / 2));
  const int w = out.width();
  const int h = out.height();
  const std::size_t n = flat.size() / 2;
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = std::clamp(flat[2 * i], 0.0, static_cast<double>(w));
    ys[i] = std::clamp(flat[2 * i + 1], 0.0, static_cast<double>(h));
  }
  std::vector<double> crossings;
  for (int y = 0; y < h; ++y) {
    const double yc = y + 0.5;
    crossings.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      if ((ys[i] > yc) != (ys[j] > yc))
        crossings.push_back((xs[j] - xs[i]) * (yc - ys[i]) / (ys[j] - ys[i]) + xs[i]);
    }
    if (crossings.empty()) continue;
    std::sort(crossings.begin(), crossings.end());
    // Pixel is inside iff an odd number of crossings lie strictly right of its center.
    std::size_t first_right = 0;
    for (int x = 0; x < w; ++x) {
      const double xc = x + 0.5;
      while (first_right < crossings.size() && !(xc < crossings[first_right])) ++first_right;
      if ((crossings.size() - first_right) % 2 == 1) out.set(x, y);
    }
  }
}

BinaryMask decode_rle(const UncompressedRle& rle, int width, int height) {
  if (rle.width != width || rle.height != height)
    throw Error(ErrorKind::DimensionMismatch,
                "RLE size " + std::to_string(rle.width) + "x" + std::to_string(rle.height) +
                    " vs image " + std::to_string(width) + "x" + std::to_string(height));
  unsigned long long total = 0;
  for (auto c : rle.counts) total += c;
  const unsigned long long expected = static_cast<unsigned long long>(width) * height;
  if (total != expected)
    throw Error(ErrorKind::RleLengthMismatch,
                "counts sum to " + std::to_string(total) + ", expected " + std::to_string(expected));
  BinaryMask mask(width, height);
  std::size_t pos = 0;
  bool value = false;
  for (auto c : rle.counts) {
    if (value) {
      for (std::size_t k = pos; k < pos + c; ++k)
        mask.set(static_cast<int>(k / height), static_cast<int>(k % height));
    }
    pos += c;
    value = !value;
  }
  return mask;
}

Json image_to_json(const ImageRecord& im) {
  Json j = {{"id", im.id}, {"file_name", im.file_name}, {"width", im.width}, {"height", im.height}};
  if (!im.captions.empty()) j["captions"] = im.captions;
  return j;
}

Json annotation_to_json(const Annotation& a) {
  return {{"id", a.id},
          {"image_id", a.image_id},
          {"category_id", a.category_id},
          {"segmentation", a.raw_segmentation},
          {"area", a.area},
          {"bbox", a.bbox},
          {"iscrowd", a.iscrowd ? 1 : 0}};
}

void verify_geometry(const Annotation& a, const ImageRecord& im) {
  const BinaryMask m = decode_annotation(a, im);
  const double pop = static_cast<double>(m.popcount());
  const double tol = std::max(0.02 * pop, 16.0);
  if (std::abs(a.area - pop) > tol)
    throw Error(ErrorKind::AreaMismatch, "annotation " + std::to_string(a.id) + " stores area " +
                                             std::to_string(a.area) + " but mask has " +
                                             std::to_string(static_cast<long long>(pop)) + " pixels");
  const double eps = 1e-6;
  const auto [bx, by, bw, bh] = a.bbox;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (!m.get(x, y)) continue;
      const double cx = x + 0.5, cy = y + 0.5;
      if (cx < bx - eps || cx > bx + bw + eps || cy < by - eps || cy > by + bh + eps)
        throw Error(ErrorKind::BboxMismatch, "annotation " + std::to_string(a.id) +
                                                 " has pixel (" + std::to_string(x) + "," +
                                                 std::to_string(y) + ") outside its bbox");
    }
}

}  // namespace

DatasetIndex::DatasetIndex(std::vector<ImageRecord> images, std::vector<Annotation> annotations,
                           std::vector<Category> categories, Json extra,
                           const ParseOptions& options)
    : images_(std::move(images)),
      annotations_(std::move(annotations)),
      categories_(std::move(categories)),
      extra_(std::move(extra)) {
  for (std::size_t i = 0; i < images_.size(); ++i) {
    const auto& im = images_[i];
    if (im.width <= 0 || im.height <= 0)
      throw Error(ErrorKind::DimensionMismatch, "image " + std::to_string(im.id) + " has non-positive size");
    if (!image_pos_.emplace(im.id, i).second)
      throw Error(ErrorKind::MalformedJson, "duplicate image id " + std::to_string(im.id));
  }
  for (std::size_t i = 0; i < categories_.size(); ++i)
    if (!category_pos_.emplace(categories_[i].id, i).second)
      throw Error(ErrorKind::MalformedJson, "duplicate category id " + std::to_string(categories_[i].id));

  std::set<ObjectId> ann_ids;
  for (std::size_t i = 0; i < annotations_.size(); ++i) {
    const auto& a = annotations_[i];
    if (!ann_ids.insert(a.id).second)
      throw Error(ErrorKind::MalformedJson, "duplicate annotation id " + std::to_string(a.id));
    if (!image_pos_.contains(a.image_id))
      throw Error(ErrorKind::DanglingReference, "annotation " + std::to_string(a.id) +
                                                    " references missing image_id " + std::to_string(a.image_id));
    if (!category_pos_.contains(a.category_id))
      throw Error(ErrorKind::DanglingReference, "annotation " + std::to_string(a.id) +
                                                    " references missing category_id " +
                                                    std::to_string(a.category_id));
    if (options.verify_geometry) verify_geometry(a, images_[image_pos_.at(a.image_id)]);
    by_image_[a.image_id].push_back(i);
  }
}

const ImageRecord& DatasetIndex::image(ObjectId id) const {
  auto it = image_pos_.find(id);
  if (it == image_pos_.end())
    throw Error(ErrorKind::DanglingReference, "no image with id " + std::to_string(id));
  return images_[it->second];
}

const std::vector<std::size_t>& DatasetIndex::annotations_of(ObjectId image_id) const {
  static const std::vector<std::size_t> kNone;
  auto it = by_image_.find(image_id);
  return it == by_image_.end() ? kNone : it->second;
}

const Category& DatasetIndex::category(ObjectId id) const {
  auto it = category_pos_.find(id);
  if (it == category_pos_.end())
    throw Error(ErrorKind::DanglingReference, "no category with id " + std::to_string(id));
  return categories_[it->second];
}

ObjectId DatasetIndex::max_image_id() const {
  ObjectId m = 0;
  for (const auto& im : images_) m = std::max(m, im.id);
  return m;
}

ObjectId DatasetIndex::max_annotation_id() const {
  ObjectId m = 0;
  for (const auto& a : annotations_) m = std::max(m, a.id);
  return m;
}

DatasetIndex parse_dataset(std::string_view json_text, const ParseOptions& options) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    malformed(e.what());
  }
  if (!root.is_object()) malformed("top level must be an object");

  std::vector<ImageRecord> images;
  for (const auto& j : required<Json>(root, "images", "dataset")) {
    ImageRecord im;
    im.id = required<ObjectId>(j, "id", "image");
    im.file_name = j.value("file_name", std::string{});
    im.width = required<int>(j, "width", "image");
    im.height = required<int>(j, "height", "image");
    if (auto it = j.find("captions"); it != j.end() && it->is_array())
      for (const auto& c : *it) im.captions.push_back(c.get<std::string>());
    images.push_back(std::move(im));
  }

  std::vector<Category> categories;
  if (auto it = root.find("categories"); it != root.end())
    for (const auto& j : *it)
      categories.push_back({required<ObjectId>(j, "id", "category"), j.value("name", std::string{})});

  std::vector<Annotation> annotations;
  std::vector<std::pair<ObjectId, std::string>> captions;
  if (auto it = root.find("annotations"); it != root.end()) {
    for (const auto& j : *it) {
      // Caption-file entries carry text, not geometry.
      if (j.contains("caption") && !j.contains("segmentation")) {
        captions.emplace_back(required<ObjectId>(j, "image_id", "caption"), j["caption"].get<std::string>());
        continue;
      }
      Annotation a;
      a.id = required<ObjectId>(j, "id", "annotation");
      a.image_id = required<ObjectId>(j, "image_id", "annotation");
      a.category_id = required<ObjectId>(j, "category_id", "annotation");
      a.raw_segmentation = required<Json>(j, "segmentation", "annotation");
      a.segmentation = segmentation_from_json(a.raw_segmentation);
      a.area = j.value("area", 0.0);
      if (auto b = j.find("bbox"); b != j.end()) {
        if (!b->is_array() || b->size() != 4) malformed("bbox must have 4 numbers");
        for (int k = 0; k < 4; ++k) a.bbox[k] = (*b)[k].get<double>();
      }
      if (auto c = j.find("iscrowd"); c != j.end())
        a.iscrowd = c->is_boolean() ? c->get<bool>() : c->get<int>() != 0;
      annotations.push_back(std::move(a));
    }
  }

  if (!captions.empty()) {
    std::unordered_map<ObjectId, std::size_t> pos;
    for (std::size_t i = 0; i < images.size(); ++i) pos[images[i].id] = i;
    for (auto& [id, text] : captions) {
      auto p = pos.find(id);
      if (p == pos.end())
        throw Error(ErrorKind::DanglingReference, "caption references missing image_id " + std::to_string(id));
      images[p->second].captions.push_back(std::move(text));
    }
  }

  Json extra = Json::object();
  for (auto it = root.begin(); it != root.end(); ++it)
    if (it.key() != "images" && it.key() != "annotations" && it.key() != "categories")
      extra[it.key()] = it.value();

  return DatasetIndex(std::move(images), std::move(annotations), std::move(categories), std::move(extra),
                      options);
}

DatasetIndex load_dataset(const std::filesystem::path& path, const ParseOptions& options) {
  const Bytes bytes = read_file(path);
  return parse_dataset(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), options);
}

BinaryMask decode_mask(const SegEncoding& seg, int width, int height) {
  if (const auto* rle = std::get_if<UncompressedRle>(&seg)) return decode_rle(*rle, width, height);
  BinaryMask mask(width, height);
  for (const auto& poly : std::get<Polygons>(seg)) rasterize_polygon(poly, mask);
  return mask;
}

BinaryMask decode_annotation(const Annotation& ann, const ImageRecord& image) {
  return decode_mask(ann.segmentation, image.width, image.height);
}

UncompressedRle encode_rle(const BinaryMask& mask) {
  UncompressedRle rle;
  rle.width = mask.width();
  rle.height = mask.height();
  std::uint32_t run = 0;
  bool value = false;
  for (int x = 0; x < mask.width(); ++x)
    for (int y = 0; y < mask.height(); ++y) {
      if (mask.get(x, y) != value) {
        rle.counts.push_back(run);
        run = 0;
        value = !value;
      }
      ++run;
    }
  rle.counts.push_back(run);
  return rle;
}

UncompressedRle decompress_rle_string(std::string_view s, int height, int width) {
  UncompressedRle rle;
  rle.height = height;
  rle.width = width;
  std::size_t k = 0;
  while (k < s.size()) {
    long long x = 0;
    int m = 0;
    bool more = true;
    while (more) {
      if (k >= s.size()) malformed("truncated compressed RLE string");
      const int c = static_cast<int>(s[k]) - 48;
      if (c < 0 || c > 63) malformed("invalid character in compressed RLE string");
      x |= static_cast<long long>(c & 0x1f) << (5 * m);
      more = (c & 0x20) != 0;
      ++k;
      ++m;
      if (!more && (c & 0x10)) x |= -1LL << (5 * m);
    }
    if (rle.counts.size() > 2) x += rle.counts[rle.counts.size() - 2];
    if (x < 0) malformed("negative run in compressed RLE string");
    rle.counts.push_back(static_cast<std::uint32_t>(x));
  }
  return rle;
}

std::string compress_rle(const UncompressedRle& rle) {
  std::string s;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    long long x = rle.counts[i];
    if (i > 2) x -= static_cast<long long>(rle.counts[i - 2]);
    bool more = true;
    while (more) {
      char c = static_cast<char>(x & 0x1f);
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      s.push_back(static_cast<char>(c + 48));
    }
  }
  return s;
}

Json provenance_to_json(const Provenance& p) {
  return {{"class_id", p.class_id},
          {"erosion", p.erosion},
          {"prompt", p.prompt},
          {"negative_prompt", p.negative_prompt},
          {"seed", p.seed},
          {"backend_id", p.backend_id},
          {"instance_count", p.instance_count},
          {"variant_index", p.variant_index},
          {"merged_annotation_ids", p.merged_annotation_ids},
          {"noise_background", p.noise_background}};
}

Json dataset_to_json(const DatasetIndex& ds) {
  Json root = ds.extra();
  Json images = Json::array();
  for (const auto& im : ds.images()) images.push_back(image_to_json(im));
  Json anns = Json::array();
  for (const auto& a : ds.annotations()) anns.push_back(annotation_to_json(a));
  Json cats = Json::array();
  for (const auto& c : ds.categories()) cats.push_back({{"id", c.id}, {"name", c.name}});
  root["images"] = std::move(images);
  root["annotations"] = std::move(anns);
  root["categories"] = std::move(cats);
  return root;
}

Json build_augmented_dataset(const DatasetIndex& base, std::span<const NewImage> new_images) {
  Json root = dataset_to_json(base);
  if (new_images.empty()) return root;

  Json& info = root["augmentation_info"];
  if (!info.is_array()) info = Json::array();
  ObjectId next_ann = base.max_annotation_id() + 1;
  for (const auto& ni : new_images) {
    const ImageRecord& src = base.image(ni.source_image_id);
    if (ni.record.width != src.width || ni.record.height != src.height)
      throw Error(ErrorKind::DimensionMismatch, "new image " + std::to_string(ni.record.id) +
                                                    " differs in size from source " +
                                                    std::to_string(src.id));
    if (base.has_image(ni.record.id))
      throw Error(ErrorKind::InvalidArgument, "new image id " + std::to_string(ni.record.id) + " already used");
    root["images"].push_back(image_to_json(ni.record));

    Json copied = Json::array();
    for (std::size_t idx : base.annotations_of(src.id)) {
      Annotation a = base.annotations()[idx];
      const ObjectId source_ann = a.id;
      a.id = next_ann++;
      a.image_id = ni.record.id;
      a.area = static_cast<double>(decode_annotation(a, src).popcount());
      root["annotations"].push_back(annotation_to_json(a));
      copied.push_back({{"id", a.id}, {"source_annotation_id", source_ann}});
    }
    Json entry = provenance_to_json(ni.provenance);
    entry["image_id"] = ni.record.id;
    entry["source_image_id"] = ni.source_image_id;
    entry["annotations"] = std::move(copied);
    info.push_back(std::move(entry));
  }
  return root;
}

std::filesystem::path write_augmented_dataset(const DatasetIndex& base, std::span<const NewImage> new_images,
                                              const std::filesystem::path& out) {
  const Json root = build_augmented_dataset(base, new_images);
  if (out.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(out.parent_path(), ec);
  }
  write_file(out, root.dump(1));
  return out;
}

}  // namespace outline_forge
