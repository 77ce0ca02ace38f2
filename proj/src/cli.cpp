#include "outline_forge/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "outline_forge/image_io.hpp"
#include "outline_forge/metrics.hpp"
#include "outline_forge/pipeline.hpp"

#ifndef OUTLINE_FORGE_VERSION
#define OUTLINE_FORGE_VERSION "dev"
#endif

namespace outline_forge {

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string coco;
  std::string images;
  bool skip_geometry = false;
  std::string manifest;
};

struct GenerationArgs {
  int erosion = 12;
  std::string backend;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string prompt_template = "photo";
  bool negative = false;
  std::string negative_prompt;
  int steps = 50;
  double guidance = 7.5;
  double failure_budget = 0.01;
  int http_attempts = 4;
  int http_in_flight = 4;
};

struct AugmentArgs {
  std::string out;
  double min_area = 0;
  int variants = 1;
  bool noise_background = false;
  bool per_instance = false;
  double blend_sigma = 2.0;
  std::string pad_fill = "edge";
  std::optional<int> fold;
  int shots = 5;
  std::string assignment = "modulo";
  std::optional<int> added;
};

void add_common(CLI::App* sub, CommonArgs& c, bool images) {
  sub->add_option("--coco", c.coco, "COCO annotation JSON")->required()->check(CLI::ExistingFile);
  if (images) sub->add_option("--images", c.images, "Directory holding the dataset images")->required();
  sub->add_flag("--skip-geometry-check", c.skip_geometry,
                "Do not check stored area and bbox against the decoded masks");
  sub->add_option("--manifest", c.manifest, "Where to write the run manifest");
}

void add_generation(CLI::App* sub, GenerationArgs& g) {
  sub->add_option("--erosion", g.erosion, "Erosion kernel side in pixels")->check(CLI::NonNegativeNumber);
  sub->add_option("--backend", g.backend,
                  "mock, identity, or an http:// inference service URL (default: $OUTLINE_FORGE_BACKEND_URL)");
  sub->add_option("--seed", g.seed, "Master seed");
  sub->add_option("--workers", g.workers, "Parallel inpainting jobs")->check(CLI::PositiveNumber);
  sub->add_option("--prompt-template", g.prompt_template,
                  "photo, class, image-of, or a custom pattern containing {class}");
  sub->add_flag("--negative,!--no-negative", g.negative, "Use the negative prompt");
  sub->add_option("--negative-prompt", g.negative_prompt, "Custom negative prompt (implies --negative)");
  sub->add_option("--steps", g.steps, "Diffusion steps sent to the backend")->check(CLI::PositiveNumber);
  sub->add_option("--guidance", g.guidance, "Classifier-free guidance scale");
  sub->add_option("--failure-budget", g.failure_budget, "Fraction of jobs allowed to fail on backend errors")
      ->check(CLI::Range(0.0, 1.0));
  sub->add_option("--http-attempts", g.http_attempts, "Attempts per request for http backends")
      ->check(CLI::PositiveNumber);
  sub->add_option("--http-in-flight", g.http_in_flight, "Concurrent requests for http backends")
      ->check(CLI::PositiveNumber);
}

void add_augment(CLI::App* sub, AugmentArgs& a, bool with_out) {
  if (with_out) sub->add_option("--out", a.out, "Output directory")->required();
  sub->add_option("--min-area", a.min_area, "Minimum annotation area in pixels")->check(CLI::NonNegativeNumber);
  sub->add_option("--variants", a.variants, "Variants per (image, class) pair")->check(CLI::NonNegativeNumber);
  sub->add_flag("--noise-background", a.noise_background, "Replace pixels outside the object with noise");
  sub->add_flag("--per-instance", a.per_instance, "One job per annotation instead of one per class");
  sub->add_option("--blend-sigma", a.blend_sigma, "Gaussian sigma of the compositing seam")
      ->check(CLI::PositiveNumber);
  sub->add_option("--pad-fill", a.pad_fill, "Padding for small images")->check(CLI::IsMember({"edge", "black"}));
}

DatasetIndex load(const CommonArgs& c) { return load_dataset(c.coco, ParseOptions{!c.skip_geometry}); }

BackendHandle backend_from(const GenerationArgs& g) {
  HttpBackendOptions http;
  http.max_attempts = g.http_attempts;
  http.max_in_flight = g.http_in_flight;
  return make_backend(g.backend, http);
}

AugmentationConfig augment_config(const GenerationArgs& g, const AugmentArgs& a) {
  AugmentationConfig cfg;
  cfg.erosion = SquareKernel{g.erosion};
  cfg.min_area = AreaFilter{a.min_area};
  cfg.blend = BlendParams{a.blend_sigma};
  cfg.prompt_template = PromptTemplate::from_name(g.prompt_template);
  cfg.use_negative = g.negative || !g.negative_prompt.empty();
  cfg.negative_prompt = g.negative_prompt;
  cfg.backend = backend_from(g);
  cfg.master_seed = g.seed;
  cfg.workers = g.workers;
  cfg.noise_background = a.noise_background;
  cfg.merge_same_class = !a.per_instance;
  cfg.steps = g.steps;
  cfg.guidance_scale = g.guidance;
  cfg.pad_fill = a.pad_fill == "black" ? PadFill::Black : PadFill::EdgeReplicate;
  cfg.failure_budget = g.failure_budget;
  return cfg;
}

std::string file_sha256(const fs::path& p) { return sha256_hex(read_file(p)); }

// Resolved values of every option of the subcommand, defaults included.
Json resolved_config(const CLI::App* sub) {
  Json cfg = Json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "manifest") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (opt->get_expected_max() == 0) {
        cfg[name] = opt->as<bool>();
      } else {
        cfg[name] = r.size() == 1 ? Json(r.front()) : Json(r);
      }
    } else if (opt->get_expected_max() == 0) {
      cfg[name] = opt->get_default_str() == "true";
    } else {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

Json make_manifest(const CLI::App* sub, const std::map<std::string, std::string>& inputs, std::uint64_t seed) {
  Json hashes = Json::object();
  for (const auto& [role, path] : inputs)
    if (!path.empty()) hashes[role] = {{"path", path}, {"sha256", file_sha256(path)}};
  return {{"command", sub->get_name()},
          {"config", resolved_config(sub)},
          {"inputs", std::move(hashes)},
          {"tool", "outline-forge"},
          {"version", OUTLINE_FORGE_VERSION},
          {"master_seed", seed}};
}

void emit_manifest(const Json& manifest, const std::string& path, Json& report) {
  if (path.empty()) {
    report["manifest"] = manifest;
    return;
  }
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  write_file(path, manifest.dump(1) + "\n");
}

std::string config_path(const CLI::App& app) {
  const CLI::Option* opt = app.get_option_no_throw("--config");
  return opt && opt->count() > 0 ? opt->as<std::string>() : std::string{};
}

std::optional<std::vector<ObjectId>> support_class_ids(const DatasetIndex& ds) {
  std::vector<ObjectId> ids;
  for (const auto& c : ds.categories()) ids.push_back(c.id);
  return ids;
}

SupportSet support_from(const DatasetIndex& ds, int fold, int shots, const std::string& assignment, double min_area,
                        std::uint64_t seed) {
  if (fold < 0 || fold >= kFoldCount)
    throw Error(ErrorKind::InvalidArgument, "fold must be in [0, " + std::to_string(kFoldCount - 1) + "]");
  const auto ids = *support_class_ids(ds);
  const auto folds = make_folds(ids, parse_fold_assignment(assignment));
  return sample_support(ds, folds[static_cast<std::size_t>(fold)], shots, AreaFilter{min_area}, seed);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Outline-guided inpainting augmentation for instance segmentation datasets", "outline-forge"};
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", std::string(OUTLINE_FORGE_VERSION));
  app.set_config("--config", "", "TOML config file; explicit flags take precedence");
  app.require_subcommand(1);

  CommonArgs common;
  GenerationArgs gen;
  AugmentArgs aug;

  auto* augment = app.add_subcommand("augment", "Inpaint objects and write an augmented dataset");
  add_common(augment, common, true);
  add_generation(augment, gen);
  add_augment(augment, aug, true);
  augment->add_option("--fold", aug.fold, "Restrict to a few-shot support set of this fold");
  augment->add_option("--shots", aug.shots, "Images per class in the support set")->check(CLI::PositiveNumber);
  augment->add_option("--assignment", aug.assignment, "Fold assignment")
      ->check(CLI::IsMember({"modulo", "contiguous"}));
  augment->add_option("--added", aug.added, "Augmented images to add (default: one per support entry and variant)")
      ->check(CLI::NonNegativeNumber);

  int fs_fold = 0;
  auto* fewshot = app.add_subcommand("fewshot", "Sample a few-shot support set");
  add_common(fewshot, common, false);
  fewshot->add_option("--fold", fs_fold, "Fold index")->required();
  fewshot->add_option("--shots", aug.shots, "Images per class")->check(CLI::PositiveNumber);
  fewshot->add_option("--assignment", aug.assignment, "Fold assignment")
      ->check(CLI::IsMember({"modulo", "contiguous"}));
  fewshot->add_option("--min-area", aug.min_area, "Minimum annotation area in pixels")
      ->check(CLI::NonNegativeNumber);
  fewshot->add_option("--seed", gen.seed, "Sampling seed");
  fewshot->add_option("--out", aug.out, "Write the support set JSON here as well as to stdout");

  int masks_per_image = 2;
  int work_size = 512;
  int output_size = 256;
  auto* fidprep = app.add_subcommand("fidprep", "Build paired real/inpainted sets for FID");
  add_common(fidprep, common, true);
  add_generation(fidprep, gen);
  fidprep->add_option("--out", aug.out, "Output directory")->required();
  fidprep->add_option("--masks-per-image", masks_per_image, "Annotations inpainted per image")
      ->check(CLI::PositiveNumber);
  fidprep->add_option("--output-size", output_size, "Side of the emitted images")->check(CLI::PositiveNumber);

  std::string cutout_dir;
  int cutout_size = 256;
  auto* cutouts = app.add_subcommand("cutouts", "Crop bounding-box pairs from a fidprep run for local FID");
  cutouts->add_option("--fidprep", cutout_dir, "Directory written by fidprep")->required()->check(CLI::ExistingDirectory);
  cutouts->add_option("--size", cutout_size, "Side of the cutout images")->check(CLI::PositiveNumber);
  cutouts->add_option("--manifest", common.manifest, "Where to write the run manifest");

  std::string real_feat, fake_feat, local_real, local_fake, embeddings;
  auto* score = app.add_subcommand("score", "Compute FID, local FID and CLIP score from precomputed features");
  score->add_option("--real-features", real_feat, "FEAT file of the real set")->check(CLI::ExistingFile);
  score->add_option("--fake-features", fake_feat, "FEAT file of the inpainted set")->check(CLI::ExistingFile);
  score->add_option("--local-real-features", local_real, "FEAT file of real cutouts")->check(CLI::ExistingFile);
  score->add_option("--local-fake-features", local_fake, "FEAT file of inpainted cutouts")->check(CLI::ExistingFile);
  score->add_option("--embeddings", embeddings, "Embedding pairs JSON for CLIP score")->check(CLI::ExistingFile);
  score->add_option("--manifest", common.manifest, "Where to write the run manifest");

  ObjectId preview_image = 0;
  std::optional<ObjectId> preview_class;
  int preview_variants = 3;
  int tile = 256;
  auto* preview = app.add_subcommand("preview", "Render a contact sheet for one object");
  add_common(preview, common, true);
  add_generation(preview, gen);
  add_augment(preview, aug, false);
  preview->add_option("--out", aug.out, "Output PNG")->required();
  preview->add_option("--image-id", preview_image, "Image id")->required();
  preview->add_option("--class-id", preview_class, "Class id (default: first eligible class)");
  preview->add_option("--count", preview_variants, "Variants to render")->check(CLI::NonNegativeNumber);
  preview->add_option("--tile", tile, "Tile side in pixels")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Parse and check a COCO dataset");
  add_common(validate, common, false);
  validate->add_option("--images", common.images, "Also check that image files exist and match their sizes");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    Json report;
    const std::string config = config_path(app);
    if (augment->parsed()) {
      const DatasetIndex ds = load(common);
      const AugmentationConfig cfg = augment_config(gen, aug);
      std::vector<AugmentationTask> plan;
      Json support_json;
      if (aug.fold) {
        const SupportSet support = support_from(ds, *aug.fold, aug.shots, aug.assignment, aug.min_area, gen.seed);
        const int added = aug.added.value_or(static_cast<int>(support.entries.size()) * aug.variants);
        plan = plan_augmentation(support, added, gen.seed);
        support_json = support_set_to_json(support);
      } else {
        plan = plan_full_dataset(ds, cfg.min_area, aug.variants, gen.seed);
      }
      fs::create_directories(aug.out);
      if (!support_json.is_null()) write_file(fs::path(aug.out) / "support.json", support_json.dump(1) + "\n");
      const Json manifest = make_manifest(augment, {{"coco", common.coco}, {"config", config}}, gen.seed);
      emit_manifest(manifest, common.manifest.empty() ? (fs::path(aug.out) / "manifest.json").string() : common.manifest,
                    report);
      const RunReport r = run_plan(ds, plan, cfg, common.images, aug.out);
      report = r.summary();
      report["tasks"] = plan.size();
    } else if (fewshot->parsed()) {
      const DatasetIndex ds = load(common);
      const SupportSet support = support_from(ds, fs_fold, aug.shots, aug.assignment, aug.min_area, gen.seed);
      report = support_set_to_json(support);
      if (!aug.out.empty()) write_file(aug.out, report.dump(1) + "\n");
      emit_manifest(make_manifest(fewshot, {{"coco", common.coco}, {"config", config}}, gen.seed), common.manifest,
                    report);
    } else if (fidprep->parsed()) {
      const DatasetIndex ds = load(common);
      FidPrepConfig cfg;
      cfg.masks_per_image = masks_per_image;
      cfg.erosion = SquareKernel{gen.erosion};
      cfg.work_resolution = {work_size, work_size};
      cfg.output_resolution = {output_size, output_size};
      cfg.seed = gen.seed;
      cfg.prompt_template = PromptTemplate::from_name(gen.prompt_template);
      cfg.use_negative = gen.negative || !gen.negative_prompt.empty();
      cfg.steps = gen.steps;
      cfg.guidance_scale = gen.guidance;
      cfg.workers = gen.workers;
      cfg.failure_budget = gen.failure_budget;
      fs::create_directories(aug.out);
      emit_manifest(make_manifest(fidprep, {{"coco", common.coco}, {"config", config}}, gen.seed),
                    common.manifest.empty() ? (fs::path(aug.out) / "manifest.json").string() : common.manifest, report);
      const FidPrepResult r = fid_prep(ds, cfg, backend_from(gen), common.images, aug.out);
      std::size_t ok = 0;
      for (const auto& e : r.entries) ok += e.status == "ok" ? 1 : 0;
      report = {{"images", r.entries.size()},
                {"prepared", ok},
                {"reversions", r.reversions},
                {"short_images", r.short_images},
                {"failed", r.failed}};
    } else if (cutouts->parsed()) {
      const Json listing = write_local_cutouts(cutout_dir, {cutout_size, cutout_size});
      report = {{"cutouts", listing.at("cutouts").size()}, {"skipped", listing.at("skipped")}};
      emit_manifest(make_manifest(cutouts, {{"fidprep", (fs::path(cutout_dir) / "fidprep.json").string()}}, 0),
                    common.manifest.empty() ? (fs::path(cutout_dir) / "cutouts.manifest.json").string()
                                            : common.manifest,
                    report);
    } else if (score->parsed()) {
      if ((real_feat.empty() != fake_feat.empty()) || (local_real.empty() != local_fake.empty()))
        throw Error(ErrorKind::InvalidArgument, "feature files must be given in real/fake pairs");
      if (real_feat.empty() && local_real.empty() && embeddings.empty())
        throw Error(ErrorKind::InvalidArgument, "nothing to score");
      report = {{"fid", nullptr}, {"local_fid", nullptr}, {"clip_score", nullptr}};
      if (!real_feat.empty())
        report["fid"] = frechet_distance(stats_of(read_features(real_feat)), stats_of(read_features(fake_feat)));
      if (!local_real.empty())
        report["local_fid"] =
            frechet_distance(stats_of(read_features(local_real)), stats_of(read_features(local_fake)));
      if (!embeddings.empty()) report["clip_score"] = clip_score(read_embeddings(embeddings));
      emit_manifest(make_manifest(score,
                                  {{"real_features", real_feat},
                                   {"fake_features", fake_feat},
                                   {"local_real_features", local_real},
                                   {"local_fake_features", local_fake},
                                   {"embeddings", embeddings}},
                                  0),
                    common.manifest, report);
    } else if (preview->parsed()) {
      const DatasetIndex ds = load(common);
      const AugmentationConfig cfg = augment_config(gen, aug);
      ObjectId class_id = 0;
      if (preview_class) {
        class_id = *preview_class;
      } else {
        bool found = false;
        for (std::size_t idx : ds.annotations_of(preview_image)) {
          if (cfg.min_area.passes(ds.annotations()[idx])) {
            class_id = ds.annotations()[idx].category_id;
            found = true;
            break;
          }
        }
        if (!found)
          throw Error(ErrorKind::InvalidArgument,
                      "image " + std::to_string(preview_image) + " has no eligible annotation");
      }
      const Image source = load_source_image(ds, preview_image, common.images);
      const Image sheet = render_preview(ds, preview_image, class_id, cfg, source, preview_variants, tile);
      if (fs::path(aug.out).has_parent_path()) fs::create_directories(fs::path(aug.out).parent_path());
      write_png(aug.out, sheet);
      report = {{"out", aug.out}, {"width", sheet.width()}, {"height", sheet.height()}, {"class_id", class_id}};
      const std::string manifest_path =
          common.manifest.empty() ? fs::path(aug.out).replace_extension(".manifest.json").string() : common.manifest;
      emit_manifest(make_manifest(preview, {{"coco", common.coco}, {"config", config}}, gen.seed), manifest_path,
                    report);
    } else if (validate->parsed()) {
      const DatasetIndex ds = load(common);
      std::size_t checked_files = 0;
      if (!common.images.empty()) {
        for (const auto& im : ds.images()) {
          const Image img = load_source_image(ds, im.id, common.images);
          if (img.width() != im.width || img.height() != im.height)
            throw Error(ErrorKind::DimensionMismatch, im.file_name + " is " + std::to_string(img.width()) + "x" +
                                                          std::to_string(img.height()) + ", record says " +
                                                          std::to_string(im.width) + "x" + std::to_string(im.height));
          ++checked_files;
        }
      }
      report = {{"valid", true},
                {"images", ds.images().size()},
                {"annotations", ds.annotations().size()},
                {"categories", ds.categories().size()},
                {"image_files_checked", checked_files}};
      emit_manifest(make_manifest(validate, {{"coco", common.coco}, {"config", config}}, 0), common.manifest, report);
    }
    out << report.dump(1) << '\n';
    return 0;
  } catch (const Error& e) {
    err << Json{{"error", {{"kind", to_string(e.kind())}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << Json{{"error", {{"kind", "Internal"}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace outline_forge
