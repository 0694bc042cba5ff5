#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "core/curation.hpp"
#include "core/png_io.hpp"
#include "core/rng.hpp"
#include "core/synthfix.hpp"
#include "core/toydiff.hpp"

using namespace dcur;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RunConfig tiny_synth_config() {
  RunConfig cfg;
  cfg.seed = 77;
  cfg.jobs = 2;
  cfg.synth.shapes = 2;
  cfg.synth.azimuth_steps = 8;
  cfg.synth.image_width = 192;
  cfg.synth.image_height = 192;
  cfg.synth.focal_px = 160.0;
  cfg.synth.point_spacing_m = 0.08;
  cfg.synth.camera_jitter_deg = 3.0;
  cfg.min_delta_deg = 3.0;
  return cfg;
}

CuratedSample random_sample(Rng& rng, const std::string& object_id,
                            const std::string& frame_id) {
  CuratedSample s;
  s.object_id = object_id;
  s.frame_id = frame_id;
  s.crop = ImageBuffer(kCropSize, kCropSize, 3);
  for (float& v : s.crop.data) {
    v = float(rng.uniform_int(0, 255)) / 255.0f;
  }
  s.trimap = Trimap(kCropSize, kCropSize, TriLabel::Background);
  for (int i = 0; i < 500; ++i) {
    s.trimap.labels[rng.uniform_int(0, kCropSize * kCropSize - 1)] =
        TriLabel::Foreground;
  }
  for (int i = 0; i < 100; ++i) {
    s.trimap.labels[rng.uniform_int(0, kCropSize * kCropSize - 1)] =
        TriLabel::Unknown;
  }
  s.orbital.elevation_rad = rng.uniform(-1.0, 1.0);
  s.orbital.azimuth_rad = rng.uniform(-kPi + 1e-9, kPi);
  s.orbital.distance_m = rng.uniform(3.0, 30.0);
  s.crop_intrinsics.fx = s.crop_intrinsics.fy = 280.0;
  s.crop_intrinsics.cx = s.crop_intrinsics.cy = 128.0;
  s.crop_intrinsics.width = s.crop_intrinsics.height = kCropSize;
  s.scale_factor = rng.uniform(0.3, 3.0);
  return s;
}

std::vector<SamplePtr> ring_samples(int n, const std::string& object_id,
                                    Rng& rng) {
  std::vector<SamplePtr> out;
  for (int i = 0; i < n; ++i) {
    auto s = std::make_shared<CuratedSample>(
        random_sample(rng, object_id, "f" + std::to_string(i)));
    s->orbital.azimuth_rad = wrap_angle(2 * kPi * i / n);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("sample_views greedy rule") {
  auto ring = [](std::initializer_list<double> degs) {
    std::vector<OrbitalPose> t;
    for (double d : degs) t.push_back({0.3, wrap_angle(d * kDegToRad), 10.0});
    return t;
  };
  SUBCASE("1-degree steps keep 0, 3, 6") {
    const auto kept = sample_views(ring({0, 1, 2, 3, 4, 5, 6, 7}), 3.0);
    CHECK(kept == std::vector<size_t>{0, 3, 6});
  }
  SUBCASE("constant azimuth keeps one frame") {
    const auto kept = sample_views(ring({42, 42, 42, 42}), 3.0);
    CHECK(kept == std::vector<size_t>{0});
  }
  SUBCASE("full 360-degree 1-degree ring keeps 120") {
    std::vector<OrbitalPose> track;
    for (int i = 0; i < 360; ++i) {
      track.push_back({0.3, wrap_angle(i * kDegToRad), 10.0});
    }
    CHECK(sample_views(track, 3.0).size() == 120);
  }
  SUBCASE("gaps between kept frames respect the threshold") {
    Rng rng(5);
    std::vector<OrbitalPose> track;
    for (int i = 0; i < 500; ++i) {
      track.push_back({0.1, rng.uniform(-kPi + 1e-9, kPi), 5.0});
    }
    const auto kept = sample_views(track, 3.0);
    for (size_t i = 1; i < kept.size(); ++i) {
      const double gap = std::abs(wrap_angle(track[kept[i]].azimuth_rad -
                                             track[kept[i - 1]].azimuth_rad));
      CHECK(gap >= 3.0 * kDegToRad);
    }
  }
}

TEST_CASE("symmetric_counterpart") {
  Rng rng(91);
  SUBCASE("pose maps (a, t, z) -> (a, -t, z) exactly") {
    for (int i = 0; i < 100; ++i) {
      const CuratedSample s = random_sample(rng, "obj", "f");
      const CuratedSample c = symmetric_counterpart(s);
      CHECK(c.orbital.elevation_rad == s.orbital.elevation_rad);
      CHECK(c.orbital.distance_m == s.orbital.distance_m);
      CHECK(c.orbital.azimuth_rad == wrap_angle(-s.orbital.azimuth_rad));
      CHECK(c.flipped == !s.flipped);
    }
  }
  SUBCASE("zero azimuth: pose unchanged, image mirrored") {
    CuratedSample s = random_sample(rng, "obj", "f");
    s.orbital.azimuth_rad = 0.0;
    const CuratedSample c = symmetric_counterpart(s);
    CHECK(c.orbital.azimuth_rad == 0.0);
    CHECK(c.crop.data != s.crop.data);
    CHECK(c.crop.at(0, 0, 0) == s.crop.at(kCropSize - 1, 0, 0));
  }
  SUBCASE("bit-exact involution on 1000 samples") {
    for (int i = 0; i < 1000; ++i) {
      const CuratedSample s = random_sample(rng, "obj", "f" + std::to_string(i));
      const CuratedSample back = symmetric_counterpart(symmetric_counterpart(s));
      CHECK(back.crop.data == s.crop.data);
      CHECK(back.trimap.labels == s.trimap.labels);
      CHECK(back.orbital.azimuth_rad == s.orbital.azimuth_rad);
      CHECK(back.orbital.elevation_rad == s.orbital.elevation_rad);
      CHECK(back.orbital.distance_m == s.orbital.distance_m);
      CHECK(back.flipped == s.flipped);
      CHECK(back.scale_factor == s.scale_factor);
    }
  }
}

TEST_CASE("make_pairs") {
  Rng rng(101);
  RunConfig cfg;
  cfg.seed = 7;

  SUBCASE("3 samples give 6 ordered pairs, self-pairs excluded") {
    const auto samples = ring_samples(3, "objA", rng);
    const auto pairs = make_pairs(samples, cfg);
    CHECK(pairs.size() == 6);
    for (const auto& p : pairs) {
      CHECK(p.source->frame_id != p.target->frame_id);
      CHECK(p.source->object_id == p.target->object_id);
    }
  }
  SUBCASE("pairs never cross objects") {
    auto a = ring_samples(3, "objA", rng);
    auto b = ring_samples(4, "objB", rng);
    a.insert(a.end(), b.begin(), b.end());
    const auto pairs = make_pairs(a, cfg);
    CHECK(pairs.size() == 6 + 12);
  }
  SUBCASE("stored conditions match a recompute from the poses") {
    const auto samples = ring_samples(4, "objA", rng);
    const auto pairs = make_pairs(samples, cfg);
    for (const auto& p : pairs) {
      const auto expect = encode_global(p.source->orbital, p.target->orbital,
                                        cfg.pose_mode, cfg.cond_distance_scale);
      REQUIRE(p.condition.values.size() == expect.values.size());
      for (size_t i = 0; i < expect.values.size(); ++i) {
        CHECK(p.condition.values[i] == expect.values[i]);
      }
    }
  }
  SUBCASE("pair cap subsamples deterministically") {
    const auto samples = ring_samples(6, "objA", rng);  // 30 ordered pairs
    cfg.train.max_pairs_per_object = 10;
    const auto pairs1 = make_pairs(samples, cfg);
    const auto pairs2 = make_pairs(samples, cfg);
    CHECK(pairs1.size() == 10);
    REQUIRE(pairs2.size() == 10);
    for (size_t i = 0; i < pairs1.size(); ++i) {
      CHECK(pairs1[i].pair_id == pairs2[i].pair_id);
    }
  }
  SUBCASE("rays live on the 32x32 latent grid") {
    const auto samples = ring_samples(2, "objA", rng);
    const auto pairs = make_pairs(samples, cfg);
    REQUIRE(!pairs.empty());
    CHECK(pairs[0].rays.width == 32);
    CHECK(pairs[0].rays.height == 32);
    CHECK(pairs[0].target_mask.w == 32);
  }
}

TEST_CASE("compose_batches") {
  Rng rng(111);
  const auto samples = ring_samples(6, "objA", rng);
  RunConfig cfg;
  const auto pairs = make_pairs(samples, cfg);  // 30 pairs

  SUBCASE("weak guidance is deterministic under a fixed seed") {
    const auto b1 = compose_batches(pairs, GuidanceMode::Weak, 4, 999);
    const auto b2 = compose_batches(pairs, GuidanceMode::Weak, 4, 999);
    REQUIRE(b1.size() == b2.size());
    bool any_flip = false;
    for (size_t i = 0; i < b1.size(); ++i) {
      REQUIRE(b1[i].slots.size() == b2[i].slots.size());
      for (size_t j = 0; j < b1[i].slots.size(); ++j) {
        CHECK(b1[i].slots[j].pair_index == b2[i].slots[j].pair_index);
        CHECK(b1[i].slots[j].source_flipped == b2[i].slots[j].source_flipped);
        any_flip = any_flip || b1[i].slots[j].source_flipped;
      }
    }
    CHECK(any_flip);  // 30 coin flips: all-heads would be a broken rng
  }
  SUBCASE("strong guidance: every pair adjacent to its flipped twin") {
    const auto batches = compose_batches(pairs, GuidanceMode::Strong, 8, 1);
    for (const auto& b : batches) {
      CHECK(!b.has_untwinned);
      REQUIRE(b.slots.size() % 2 == 0);
      for (size_t j = 0; j < b.slots.size(); j += 2) {
        CHECK(b.slots[j].pair_index == b.slots[j + 1].pair_index);
        CHECK(!b.slots[j].source_flipped);
        CHECK(b.slots[j + 1].source_flipped);
      }
    }
  }
  SUBCASE("odd strong batch flags one untwinned pair") {
    const auto batches = compose_batches(pairs, GuidanceMode::Strong, 3, 1);
    REQUIRE(!batches.empty());
    const Batch& b = batches[0];
    CHECK(b.has_untwinned);
    CHECK(b.slots.size() == 3);
    CHECK(b.slots[0].pair_index == b.slots[1].pair_index);
    CHECK(b.slots[2].pair_index != b.slots[0].pair_index);
  }
  SUBCASE("strong guidance with batch 1 is rejected") {
    try {
      compose_batches(pairs, GuidanceMode::Strong, 1, 1);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BatchTooSmall);
    }
  }
  SUBCASE("every pair appears exactly once per weak epoch") {
    const auto batches = compose_batches(pairs, GuidanceMode::Weak, 7, 3);
    std::vector<int> seen(pairs.size(), 0);
    for (const auto& b : batches) {
      for (const auto& s : b.slots) seen[s.pair_index]++;
    }
    for (int c : seen) CHECK(c == 1);
  }
}

TEST_CASE("manifest validation errors") {
  TempDir tmp("dcur_manifest_errors");

  Json base;
  base["format_version"] = 1;
  base["cameras"] = Json::array({Json{{"id", "cam0"},
                                      {"fx", 100.0},
                                      {"fy", 100.0},
                                      {"cx", 32.0},
                                      {"cy", 32.0},
                                      {"width", 64},
                                      {"height", 64}}});
  base["frames"] = Json::array(
      {Json{{"id", "f0"},
            {"camera_id", "cam0"},
            {"timestamp", 0.0},
            {"image", "f0.png"},
            {"semantic", "f0s.png"},
            {"instance", "f0i.png"},
            {"world_to_camera",
             Json{{"rotation", {1, 0, 0, 0, 1, 0, 0, 0, 1}},
                  {"translation", {0, 0, 10}}}}}});
  base["objects"] = Json::array(
      {Json{{"id", "obj0"},
            {"class", "car"},
            {"instance_id", 1},
            {"track", Json::array({Json{{"frame_id", "f0"},
                                        {"center", {0, 0, 0}},
                                        {"dimensions", {4, 2, 1.5}},
                                        {"heading",
                                         {{"w", 1}, {"x", 0}, {"y", 0}, {"z", 0}}}}})}}});
  base["label_map"] = Json{{"classes", Json::array({Json{{"id", 1}, {"name", "car"}}})}};

  ImageBuffer img(64, 64, 3, 0.5f);
  ImageBuffer lbl(64, 64, 1, 0.0f);

  SUBCASE("minimal valid manifest loads") {
    write_png_rgb((tmp.path / "f0.png").string(), img);
    write_png_label((tmp.path / "f0s.png").string(), lbl);
    write_png_label((tmp.path / "f0i.png").string(), lbl);
    write_json_file((tmp.path / "manifest.json").string(), base);
    const auto m = load_manifest((tmp.path / "manifest.json").string());
    CHECK(m.objects.size() == 1);
    CHECK(m.frames.size() == 1);
  }
  SUBCASE("missing image file -> MissingAsset naming it") {
    write_json_file((tmp.path / "manifest.json").string(), base);
    try {
      load_manifest((tmp.path / "manifest.json").string());
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingAsset);
      CHECK(std::string(e.what()).find("f0.png") != std::string::npos);
    }
  }
  SUBCASE("non-orthonormal extrinsics -> InconsistentTrack") {
    Json bad = base;
    bad["frames"][0]["world_to_camera"]["rotation"] = {2, 0, 0, 0, 1, 0, 0, 0, 1};
    write_json_file((tmp.path / "manifest.json").string(), bad);
    write_png_rgb((tmp.path / "f0.png").string(), img);
    write_png_label((tmp.path / "f0s.png").string(), lbl);
    write_png_label((tmp.path / "f0i.png").string(), lbl);
    try {
      load_manifest((tmp.path / "manifest.json").string());
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InconsistentTrack);
    }
  }
  SUBCASE("track citing a missing frame -> InconsistentTrack") {
    Json bad = base;
    bad["objects"][0]["track"][0]["frame_id"] = "nope";
    write_json_file((tmp.path / "manifest.json").string(), bad);
    try {
      load_manifest((tmp.path / "manifest.json").string());
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InconsistentTrack);
    }
  }
  SUBCASE("broken JSON -> ParseError") {
    std::ofstream((tmp.path / "manifest.json").string()) << "{ not json";
    try {
      load_manifest((tmp.path / "manifest.json").string());
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
    }
  }
  SUBCASE("future format version -> VersionMismatch") {
    Json bad = base;
    bad["format_version"] = 99;
    write_json_file((tmp.path / "manifest.json").string(), bad);
    try {
      load_manifest((tmp.path / "manifest.json").string());
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::VersionMismatch);
    }
  }
}

TEST_CASE("curate_object on a synthetic orbit recovers ground-truth poses") {
  TempDir tmp("dcur_curate_synth");
  const RunConfig cfg = tiny_synth_config();
  const DrivingLogManifest manifest = make_toy_dataset(cfg, tmp.path.string());

  const auto samples = curate_object(manifest, "obj00", cfg, nullptr);
  CHECK(samples.size() == size_t(cfg.synth.azimuth_steps));
  for (const auto& s : samples) {
    // find the matching track entry
    const ManifestObject& obj = manifest.object("obj00");
    const TrackEntry* entry = nullptr;
    for (const auto& e : obj.track) {
      if (e.frame_id == s.frame_id) entry = &e;
    }
    REQUIRE(entry != nullptr);
    REQUIRE(entry->gt_orbital.has_value());
    CHECK(std::abs(s.orbital.elevation_rad - entry->gt_orbital->elevation_rad) < 1e-6);
    CHECK(std::abs(wrap_angle(s.orbital.azimuth_rad -
                              entry->gt_orbital->azimuth_rad)) < 1e-6);
    CHECK(std::abs(s.orbital.distance_m - entry->gt_orbital->distance_m) < 1e-6);
    CHECK(s.crop.width == kCropSize);
    CHECK(s.trimap.width == kCropSize);
    // the cuboid is visible and mostly centered
    CHECK(s.trimap.at(128, 128) == TriLabel::Foreground);
  }
}

TEST_CASE("curate_object error paths") {
  TempDir tmp("dcur_curate_errors");
  RunConfig cfg = tiny_synth_config();
  cfg.synth.shapes = 1;
  cfg.synth.azimuth_steps = 4;
  const DrivingLogManifest manifest = make_toy_dataset(cfg, tmp.path.string());

  SUBCASE("unknown object id") {
    CHECK_THROWS_AS(curate_object(manifest, "missing", cfg, nullptr), Error);
  }
  SUBCASE("max_occlusion 0 filters everything -> NoUsableFrames") {
    RunConfig strict = cfg;
    strict.max_occlusion = -0.1;  // even 0% occlusion is too much
    try {
      curate_object(manifest, "obj00", strict, nullptr);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoUsableFrames);
    }
  }
}

TEST_CASE("dataset write/read round trip") {
  TempDir tmp("dcur_dataset_roundtrip");
  Rng rng(131);
  auto samples = ring_samples(4, "objA", rng);
  auto more = ring_samples(3, "objB", rng);
  samples.insert(samples.end(), more.begin(), more.end());
  RunConfig cfg;
  cfg.seed = 5;
  const auto pairs = make_pairs(samples, cfg);

  write_dataset(samples, pairs, tmp.path.string(), cfg.seed, cfg.to_json());
  const DatasetReadResult back = read_dataset(tmp.path.string());

  REQUIRE(back.samples.size() == samples.size());
  REQUIRE(back.pairs.size() == pairs.size());
  CHECK(back.incomplete_objects.empty());
  CHECK(back.seed == cfg.seed);

  for (size_t i = 0; i < samples.size(); ++i) {
    const CuratedSample& a = *samples[i];
    const CuratedSample& b = *back.samples[i];
    CHECK(a.object_id == b.object_id);
    CHECK(a.frame_id == b.frame_id);
    CHECK(a.crop.data == b.crop.data);  // byte-exact crops
    CHECK(a.trimap.labels == b.trimap.labels);
    CHECK(a.orbital.elevation_rad == b.orbital.elevation_rad);
    CHECK(a.orbital.azimuth_rad == b.orbital.azimuth_rad);
    CHECK(a.orbital.distance_m == b.orbital.distance_m);
    CHECK(a.crop_intrinsics.fx == b.crop_intrinsics.fx);
    CHECK(a.flipped == b.flipped);
    CHECK(a.scale_factor == b.scale_factor);
  }
  for (size_t i = 0; i < pairs.size(); ++i) {
    CHECK(back.pairs[i].pair_id == pairs[i].pair_id);
    CHECK(back.pairs[i].condition.values == pairs[i].condition.values);
    CHECK(back.pairs[i].rays.data == pairs[i].rays.data);
    CHECK(back.pairs[i].target_mask.values == pairs[i].target_mask.values);
  }
}

TEST_CASE("dataset partial write is reported and the rest loads") {
  TempDir tmp("dcur_dataset_partial");
  Rng rng(151);
  auto samples = ring_samples(3, "objA", rng);
  auto more = ring_samples(3, "objB", rng);
  samples.insert(samples.end(), more.begin(), more.end());
  RunConfig cfg;
  const auto pairs = make_pairs(samples, cfg);
  write_dataset(samples, pairs, tmp.path.string(), 1, Json::object());

  // simulate an interrupted writer: objB lost its completion index
  fs::remove(tmp.path / "objects" / "objB" / "index.json");
  const DatasetReadResult back = read_dataset(tmp.path.string());
  CHECK(back.incomplete_objects == std::vector<std::string>{"objB"});
  CHECK(back.samples.size() == 3);
  CHECK(back.pairs.size() == 6);       // objA pairs only
  CHECK(back.skipped_pairs == 6);      // objB pairs reported as skipped
}

TEST_CASE("dataset future version is rejected") {
  TempDir tmp("dcur_dataset_version");
  Rng rng(161);
  const auto samples = ring_samples(2, "objA", rng);
  RunConfig cfg;
  write_dataset(samples, make_pairs(samples, cfg), tmp.path.string(), 1,
                Json::object());
  Json top = parse_json_file((tmp.path / "dataset.json").string());
  top["format_version"] = 2;
  write_json_file((tmp.path / "dataset.json").string(), top);
  try {
    read_dataset(tmp.path.string());
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::VersionMismatch);
  }
}
