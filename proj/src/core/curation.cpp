#include "core/curation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "core/imaging.hpp"
#include "core/parallel.hpp"
#include "core/png_io.hpp"
#include "core/rng.hpp"

namespace fs = std::filesystem;

namespace dcur {

namespace {

Json rigid_to_json(const RigidTransform& t) {
  std::vector<double> rot(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot[r * 3 + c] = t.rotation(r, c);
  return Json{{"rotation", rot},
              {"translation", {t.translation.x(), t.translation.y(),
                               t.translation.z()}}};
}

RigidTransform rigid_from_json(const Json& j, const std::string& context) {
  const auto rot = json_require<std::vector<double>>(j, "rotation", context);
  const auto trans = json_require<std::vector<double>>(j, "translation", context);
  if (rot.size() != 9 || trans.size() != 3) {
    raise(ErrorCode::ParseError, context + ": rotation must have 9 entries and translation 3");
  }
  RigidTransform t;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t.rotation(r, c) = rot[r * 3 + c];
  t.translation = Vec3(trans[0], trans[1], trans[2]);
  return t;
}

Json camera_to_json(const CameraModel& k) {
  return Json{{"fx", k.fx},       {"fy", k.fy},     {"cx", k.cx},
              {"cy", k.cy},       {"width", k.width},
              {"height", k.height}};
}

CameraModel camera_from_json(const Json& j, const std::string& context) {
  CameraModel k;
  k.fx = json_require<double>(j, "fx", context);
  k.fy = json_require<double>(j, "fy", context);
  k.cx = json_require<double>(j, "cx", context);
  k.cy = json_require<double>(j, "cy", context);
  k.width = json_require<int>(j, "width", context);
  k.height = json_require<int>(j, "height", context);
  return k;
}

Json orbital_to_json(const OrbitalPose& p) {
  return Json{{"elevation_rad", p.elevation_rad},
              {"azimuth_rad", p.azimuth_rad},
              {"distance_m", p.distance_m}};
}

OrbitalPose orbital_from_json(const Json& j, const std::string& context) {
  OrbitalPose p;
  p.elevation_rad = json_require<double>(j, "elevation_rad", context);
  p.azimuth_rad = json_require<double>(j, "azimuth_rad", context);
  p.distance_m = json_require<double>(j, "distance_m", context);
  return p;
}

Mat3 quaternion_to_matrix(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (n < 1e-12) {
    raise(ErrorCode::ParseError, "zero-norm heading quaternion");
  }
  return Eigen::Quaterniond(w / n, x / n, y / n, z / n).toRotationMatrix();
}

// Snap RGB samples onto the 8-bit grid the PNG format stores, so persisted
// datasets round-trip exactly.
void quantize_to_bytes(ImageBuffer& img) {
  for (float& v : img.data) {
    const float clamped = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    v = static_cast<float>(std::lround(clamped * 255.0f)) / 255.0f;
  }
}

}  // namespace

const ManifestCamera& DrivingLogManifest::camera(const std::string& id) const {
  for (const auto& c : cameras) {
    if (c.id == id) return c;
  }
  raise(ErrorCode::InconsistentTrack, "unknown camera id: " + id);
}

const ManifestFrame& DrivingLogManifest::frame(const std::string& id) const {
  for (const auto& f : frames) {
    if (f.id == id) return f;
  }
  raise(ErrorCode::InconsistentTrack, "unknown frame id: " + id);
}

const ManifestObject& DrivingLogManifest::object(const std::string& id) const {
  for (const auto& o : objects) {
    if (o.id == id) return o;
  }
  raise(ErrorCode::InvalidArgument, "unknown object id: " + id);
}

std::unordered_set<int> DrivingLogManifest::occluder_ids(
    const std::vector<std::string>& class_names) const {
  std::unordered_set<int> ids;
  for (const auto& name : class_names) {
    for (const auto& cls : label_classes) {
      if (cls.name == name) ids.insert(cls.id);
    }
  }
  return ids;
}

DrivingLogManifest manifest_from_json(const Json& j, const std::string& base_dir,
                                      bool check_assets) {
  check_format_version(j, "manifest");
  DrivingLogManifest m;
  m.base_dir = base_dir;

  for (const auto& cj : json_require<Json>(j, "cameras", "manifest")) {
    ManifestCamera cam;
    cam.id = json_require<std::string>(cj, "id", "camera");
    cam.model = camera_from_json(cj, "camera " + cam.id);
    try {
      cam.model.validate();
    } catch (const Error& e) {
      raise(ErrorCode::InconsistentTrack,
            "camera " + cam.id + ": " + e.what());
    }
    m.cameras.push_back(std::move(cam));
  }

  for (const auto& fj : json_require<Json>(j, "frames", "manifest")) {
    ManifestFrame f;
    f.id = json_require<std::string>(fj, "id", "frame");
    f.camera_id = json_require<std::string>(fj, "camera_id", "frame " + f.id);
    f.timestamp = json_require<double>(fj, "timestamp", "frame " + f.id);
    f.image_path = json_require<std::string>(fj, "image", "frame " + f.id);
    f.semantic_path = json_require<std::string>(fj, "semantic", "frame " + f.id);
    f.instance_path = json_require<std::string>(fj, "instance", "frame " + f.id);
    f.world_to_camera =
        rigid_from_json(json_require<Json>(fj, "world_to_camera", "frame " + f.id),
                        "frame " + f.id + " extrinsics");
    m.frames.push_back(std::move(f));
  }

  for (const auto& oj : json_require<Json>(j, "objects", "manifest")) {
    ManifestObject o;
    o.id = json_require<std::string>(oj, "id", "object");
    o.class_name = json_require<std::string>(oj, "class", "object " + o.id);
    o.instance_id = json_require<int>(oj, "instance_id", "object " + o.id);
    for (const auto& tj : json_require<Json>(oj, "track", "object " + o.id)) {
      TrackEntry e;
      const std::string ctx = "object " + o.id + " track entry";
      e.frame_id = json_require<std::string>(tj, "frame_id", ctx);
      const auto center = json_require<std::vector<double>>(tj, "center", ctx);
      const auto dims = json_require<std::vector<double>>(tj, "dimensions", ctx);
      if (center.size() != 3 || dims.size() != 3) {
        raise(ErrorCode::ParseError, ctx + ": center and dimensions need 3 entries");
      }
      e.box.center_world = Vec3(center[0], center[1], center[2]);
      e.box.dimensions = Vec3(dims[0], dims[1], dims[2]);
      const Json& q = json_require<Json>(tj, "heading", ctx);
      e.box.heading_world = quaternion_to_matrix(
          json_require<double>(q, "w", ctx), json_require<double>(q, "x", ctx),
          json_require<double>(q, "y", ctx), json_require<double>(q, "z", ctx));
      if (tj.contains("bbox2d")) {
        const auto b = tj.at("bbox2d").get<std::vector<double>>();
        if (b.size() != 4) raise(ErrorCode::ParseError, ctx + ": bbox2d needs 4 entries");
        e.bbox2d = std::array<double, 4>{b[0], b[1], b[2], b[3]};
      }
      if (tj.contains("gt_orbital")) {
        e.gt_orbital = orbital_from_json(tj.at("gt_orbital"), ctx);
      }
      o.track.push_back(std::move(e));
    }
    m.objects.push_back(std::move(o));
  }

  if (j.contains("label_map")) {
    for (const auto& lj : j.at("label_map").at("classes")) {
      LabelClass cls;
      cls.id = json_require<int>(lj, "id", "label class");
      cls.name = json_require<std::string>(lj, "name", "label class");
      m.label_classes.push_back(std::move(cls));
    }
  }

  // Referential and invariant checks.
  for (const auto& f : m.frames) {
    m.camera(f.camera_id);
    if (!f.world_to_camera.is_orthonormal()) {
      raise(ErrorCode::InconsistentTrack,
            "frame " + f.id + ": extrinsics rotation not orthonormal");
    }
  }
  for (const auto& o : m.objects) {
    if (o.track.empty()) {
      raise(ErrorCode::InconsistentTrack, "object " + o.id + " has an empty track");
    }
    for (const auto& e : o.track) {
      m.frame(e.frame_id);
      try {
        e.box.validate();
      } catch (const Error& err) {
        raise(ErrorCode::InconsistentTrack,
              "object " + o.id + " frame " + e.frame_id + ": " + err.what());
      }
    }
  }

  if (check_assets) {
    std::vector<std::string> missing;
    for (const auto& f : m.frames) {
      for (const std::string& rel :
           {f.image_path, f.semantic_path, f.instance_path}) {
        const fs::path p = fs::path(base_dir) / rel;
        if (!fs::exists(p)) missing.push_back(p.string());
      }
    }
    if (!missing.empty()) {
      std::string msg = "missing assets:";
      for (const auto& p : missing) msg += " " + p;
      raise(ErrorCode::MissingAsset, msg);
    }
  }
  return m;
}

DrivingLogManifest load_manifest(const std::string& path) {
  const Json j = parse_json_file(path);
  return manifest_from_json(j, fs::path(path).parent_path().string());
}

Json manifest_to_json(const DrivingLogManifest& m) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["cameras"] = Json::array();
  for (const auto& c : m.cameras) {
    Json cj = camera_to_json(c.model);
    cj["id"] = c.id;
    j["cameras"].push_back(cj);
  }
  j["frames"] = Json::array();
  for (const auto& f : m.frames) {
    j["frames"].push_back(Json{{"id", f.id},
                               {"camera_id", f.camera_id},
                               {"timestamp", f.timestamp},
                               {"image", f.image_path},
                               {"semantic", f.semantic_path},
                               {"instance", f.instance_path},
                               {"world_to_camera", rigid_to_json(f.world_to_camera)}});
  }
  j["objects"] = Json::array();
  for (const auto& o : m.objects) {
    Json oj{{"id", o.id}, {"class", o.class_name}, {"instance_id", o.instance_id}};
    oj["track"] = Json::array();
    for (const auto& e : o.track) {
      const Eigen::Quaterniond q(e.box.heading_world);
      Json tj{{"frame_id", e.frame_id},
              {"center", {e.box.center_world.x(), e.box.center_world.y(),
                          e.box.center_world.z()}},
              {"dimensions", {e.box.dimensions.x(), e.box.dimensions.y(),
                              e.box.dimensions.z()}},
              {"heading", {{"w", q.w()}, {"x", q.x()}, {"y", q.y()}, {"z", q.z()}}}};
      if (e.bbox2d) {
        tj["bbox2d"] = {(*e.bbox2d)[0], (*e.bbox2d)[1], (*e.bbox2d)[2],
                        (*e.bbox2d)[3]};
      }
      if (e.gt_orbital) tj["gt_orbital"] = orbital_to_json(*e.gt_orbital);
      oj["track"].push_back(std::move(tj));
    }
    j["objects"].push_back(std::move(oj));
  }
  Json classes = Json::array();
  for (const auto& cls : m.label_classes) {
    classes.push_back(Json{{"id", cls.id}, {"name", cls.name}});
  }
  j["label_map"] = Json{{"classes", classes}};
  return j;
}

std::vector<size_t> sample_views(const std::vector<OrbitalPose>& track,
                                 double min_delta_deg) {
  if (track.empty()) {
    raise(ErrorCode::InvalidArgument, "sample_views: empty track");
  }
  const double min_delta = min_delta_deg * kDegToRad;
  std::vector<size_t> kept = {0};
  double last = track[0].azimuth_rad;
  for (size_t i = 1; i < track.size(); ++i) {
    const double gap = std::abs(wrap_angle(track[i].azimuth_rad - last));
    if (gap >= min_delta) {
      kept.push_back(i);
      last = track[i].azimuth_rad;
    }
  }
  return kept;
}

namespace {

struct FrameWork {
  const ManifestFrame* frame = nullptr;
  const TrackEntry* entry = nullptr;
  OrbitalPose pose;
};

std::array<double, 4> project_box_bbox(const ObjectBox3D& box,
                                       const RigidTransform& cam,
                                       const CameraModel& k) {
  double min_u = 1e300, min_v = 1e300, max_u = -1e300, max_v = -1e300;
  for (int i = 0; i < 8; ++i) {
    const Vec3 corner_obj(((i & 1) ? 0.5 : -0.5) * box.dimensions.x(),
                          ((i & 2) ? 0.5 : -0.5) * box.dimensions.y(),
                          ((i & 4) ? 0.5 : -0.5) * box.dimensions.z());
    const Vec3 p = cam.apply(box.center_world + box.heading_world * corner_obj);
    if (p.z() <= 1e-9) {
      raise(ErrorCode::DegenerateBox, "3D box corner behind the camera");
    }
    const double u = k.fx * p.x() / p.z() + k.cx;
    const double v = k.fy * p.y() / p.z() + k.cy;
    min_u = std::min(min_u, u);
    max_u = std::max(max_u, u);
    min_v = std::min(min_v, v);
    max_v = std::max(max_v, v);
  }
  return {min_u, min_v, max_u - min_u, max_v - min_v};
}

}  // namespace

std::vector<CuratedSample> curate_object(const DrivingLogManifest& manifest,
                                         const std::string& object_id,
                                         const RunConfig& config,
                                         RunLog* log) {
  const ManifestObject& obj = manifest.object(object_id);
  const auto occluders = manifest.occluder_ids(config.occluder_classes);

  auto skip = [&](const std::string& frame_id, const std::string& reason,
                  const std::string& detail) {
    if (log) {
      log->info("frame_skipped", Json{{"object_id", object_id},
                                      {"frame_id", frame_id},
                                      {"reason", reason},
                                      {"detail", detail}});
    }
  };

  // Track entries in time order, with recoverable orbital poses.
  std::vector<FrameWork> work;
  for (const auto& entry : obj.track) {
    FrameWork fw;
    fw.frame = &manifest.frame(entry.frame_id);
    fw.entry = &entry;
    work.push_back(fw);
  }
  std::stable_sort(work.begin(), work.end(),
                   [](const FrameWork& a, const FrameWork& b) {
                     return a.frame->timestamp < b.frame->timestamp;
                   });

  std::vector<FrameWork> usable;
  for (auto& fw : work) {
    try {
      fw.pose = orbital_from_camera(fw.frame->world_to_camera, fw.entry->box);
      usable.push_back(fw);
    } catch (const Error& e) {
      skip(fw.frame->id, error_code_name(e.code()), e.what());
    }
  }
  if (usable.empty()) {
    raise(ErrorCode::NoUsableFrames,
          "object " + object_id + ": no frame yields a valid orbital pose");
  }

  std::vector<OrbitalPose> poses;
  poses.reserve(usable.size());
  for (const auto& fw : usable) poses.push_back(fw.pose);
  const std::vector<size_t> kept = sample_views(poses, config.min_delta_deg);

  std::vector<CuratedSample> samples;
  for (size_t idx : kept) {
    const FrameWork& fw = usable[idx];
    const ManifestFrame& frame = *fw.frame;
    const CameraModel& k_src = manifest.camera(frame.camera_id).model;
    try {
      const Mat3 r_virt = virtual_rotation(frame.world_to_camera, fw.entry->box);

      CuratedSample s;
      s.object_id = object_id;
      s.frame_id = frame.id;
      s.orbital = fw.pose;

      Mat3 h;
      if (config.crop_strategy == CropStrategy::FixedFov) {
        h = fixed_fov_homography(k_src, config.fov_deg, r_virt,
                                 &s.crop_intrinsics);
        s.scale_factor = s.crop_intrinsics.fx / k_src.fx;
      } else {
        RigidTransform rotated_cam;
        rotated_cam.rotation = r_virt * frame.world_to_camera.rotation;
        rotated_cam.translation = r_virt * frame.world_to_camera.translation;
        const auto bbox = project_box_bbox(fw.entry->box, rotated_cam, k_src);
        h = adaptive_homography(k_src, bbox, config.expand_ratio, r_virt,
                                &s.crop_intrinsics, &s.scale_factor);
      }

      const fs::path base(manifest.base_dir);
      const ImageBuffer image = read_png_rgb((base / frame.image_path).string());
      const ImageBuffer semantic =
          read_png_label((base / frame.semantic_path).string());
      const ImageBuffer instance =
          read_png_label((base / frame.instance_path).string());

      s.crop = warp_image(image, h, kCropSize, kCropSize, kFillWhite);
      quantize_to_bytes(s.crop);
      const ImageBuffer sem_crop =
          warp_image(semantic, h, kCropSize, kCropSize, {0.0f, 0.0f, 0.0f});
      const ImageBuffer inst_crop =
          warp_image(instance, h, kCropSize, kCropSize, {0.0f, 0.0f, 0.0f});
      s.trimap = trimap_from_semantics(sem_crop, inst_crop, obj.instance_id,
                                       occluders);

      const double unknown = s.trimap.unknown_fraction();
      if (unknown > config.max_occlusion) {
        skip(frame.id, "OverOccluded",
             "unknown fraction " + std::to_string(unknown));
        continue;
      }
      samples.push_back(std::move(s));
    } catch (const Error& e) {
      skip(frame.id, error_code_name(e.code()), e.what());
    }
  }
  if (samples.empty()) {
    raise(ErrorCode::NoUsableFrames,
          "object " + object_id + ": every sampled frame was skipped");
  }
  return samples;
}

std::vector<CuratedSample> curate_all(const DrivingLogManifest& manifest,
                                      const RunConfig& config, RunLog* log) {
  std::vector<std::vector<CuratedSample>> per_object(manifest.objects.size());
  std::vector<std::string> failures(manifest.objects.size());
  parallel_for(manifest.objects.size(), config.effective_jobs(), [&](size_t i) {
    try {
      per_object[i] = curate_object(manifest, manifest.objects[i].id, config, log);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoUsableFrames) {
        failures[i] = e.what();
      } else {
        throw;
      }
    }
  });
  std::vector<CuratedSample> all;
  for (size_t i = 0; i < per_object.size(); ++i) {
    if (!failures[i].empty() && log) {
      log->warn("object_skipped", Json{{"object_id", manifest.objects[i].id},
                                       {"reason", "NoUsableFrames"},
                                       {"detail", failures[i]}});
    }
    for (auto& s : per_object[i]) all.push_back(std::move(s));
  }
  if (all.empty()) {
    raise(ErrorCode::NoUsableFrames, "no object produced any curated sample");
  }
  return all;
}

CuratedSample symmetric_counterpart(const CuratedSample& s) {
  CuratedSample out;
  out.object_id = s.object_id;
  out.frame_id = s.frame_id;
  out.crop = hflip(s.crop);
  out.trimap = s.trimap.hflip();
  out.orbital = s.orbital;
  out.orbital.azimuth_rad = wrap_angle(-s.orbital.azimuth_rad);
  out.crop_intrinsics = s.crop_intrinsics;
  out.flipped = !s.flipped;
  out.scale_factor = s.scale_factor;
  return out;
}

PairPayload make_pair_payload(const OrbitalPose& src_pose,
                              const OrbitalPose& trg_pose,
                              const CameraModel& target_intrinsics,
                              PoseMode mode, double distance_scale,
                              int latent_size) {
  PairPayload payload;
  payload.condition = encode_global(src_pose, trg_pose, mode, distance_scale);
  // Cameras built in the shared object frame; the relative transform does not
  // depend on that frame choice.
  const RigidTransform w_src = orbital_to_camera(src_pose, ObjectBox3D::identity());
  const RigidTransform w_trg = orbital_to_camera(trg_pose, ObjectBox3D::identity());
  const RigidTransform target_to_source = w_src.compose(w_trg.inverse());
  payload.rays =
      plucker_map(target_intrinsics, target_to_source, latent_size, latent_size);
  return payload;
}

std::vector<TrainingPair> make_pairs(const std::vector<SamplePtr>& samples,
                                     const RunConfig& config) {
  // Group sample indices by object, preserving input order.
  std::vector<std::pair<std::string, std::vector<size_t>>> groups;
  for (size_t i = 0; i < samples.size(); ++i) {
    const std::string& id = samples[i]->object_id;
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == id; });
    if (it == groups.end()) {
      groups.push_back({id, {i}});
    } else {
      it->second.push_back(i);
    }
  }

  std::vector<TrainingPair> pairs;
  for (const auto& [object_id, indices] : groups) {
    std::vector<std::pair<size_t, size_t>> ordered;
    for (size_t a : indices) {
      for (size_t b : indices) {
        if (a != b) ordered.push_back({a, b});
      }
    }
    const int cap = config.train.max_pairs_per_object;
    if (cap > 0 && ordered.size() > static_cast<size_t>(cap)) {
      Rng rng(seed_for(config.seed, "pair_subsample", hash_str(object_id)));
      rng.shuffle(ordered);
      ordered.resize(static_cast<size_t>(cap));
      // Restore a stable order after subsampling.
      std::sort(ordered.begin(), ordered.end());
    }
    for (const auto& [a, b] : ordered) {
      TrainingPair p;
      p.source = samples[a];
      p.target = samples[b];
      p.pair_id = object_id + ":" + p.source->frame_id + "->" + p.target->frame_id;
      PairPayload payload = make_pair_payload(
          p.source->orbital, p.target->orbital, p.target->crop_intrinsics,
          config.pose_mode, config.cond_distance_scale);
      p.condition = std::move(payload.condition);
      p.rays = std::move(payload.rays);
      p.target_mask = latent_mask(p.target->trimap);
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

std::vector<Batch> compose_batches(const std::vector<TrainingPair>& pairs,
                                   GuidanceMode mode, int batch_size,
                                   uint64_t rng_seed) {
  if (pairs.empty()) {
    raise(ErrorCode::InvalidArgument, "compose_batches: no pairs");
  }
  if (batch_size < 1) {
    raise(ErrorCode::InvalidArgument, "compose_batches: batch_size must be >= 1");
  }
  if (mode == GuidanceMode::Strong && batch_size < 2) {
    raise(ErrorCode::BatchTooSmall,
          "strong guidance needs batch_size >= 2 to hold a pair and its twin");
  }

  Rng rng(rng_seed);
  std::vector<int> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);

  std::vector<Batch> batches;
  if (mode == GuidanceMode::Weak) {
    for (size_t at = 0; at < order.size(); at += batch_size) {
      Batch b;
      const size_t end = std::min(order.size(), at + batch_size);
      for (size_t i = at; i < end; ++i) {
        b.slots.push_back({order[i], rng.uniform() < 0.5});
      }
      batches.push_back(std::move(b));
    }
    return batches;
  }

  // Strong guidance: adjacent (pair, source-flipped twin) slots.
  const int twinned = batch_size / 2;
  const bool odd = (batch_size % 2) != 0;
  size_t at = 0;
  while (at < order.size()) {
    Batch b;
    for (int i = 0; i < twinned && at < order.size(); ++i, ++at) {
      b.slots.push_back({order[at], false});
      b.slots.push_back({order[at], true});
    }
    if (odd && at < order.size()) {
      b.slots.push_back({order[at], false});
      b.has_untwinned = true;
      ++at;
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

namespace {

Json sample_pose_json(const CuratedSample& s) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["object_id"] = s.object_id;
  j["frame_id"] = s.frame_id;
  j["orbital"] = orbital_to_json(s.orbital);
  j["crop_intrinsics"] = camera_to_json(s.crop_intrinsics);
  j["flipped"] = s.flipped;
  j["scale_factor"] = s.scale_factor;
  return j;
}

Json condition_to_json(const GlobalPoseCondition& c) {
  return Json{{"mode", pose_mode_name(c.mode)}, {"values", c.values}};
}

GlobalPoseCondition condition_from_json(const Json& j, const std::string& ctx) {
  GlobalPoseCondition c;
  c.mode = pose_mode_from_name(json_require<std::string>(j, "mode", ctx));
  c.values = json_require<std::vector<double>>(j, "values", ctx);
  return c;
}

}  // namespace

void write_dataset(const std::vector<SamplePtr>& samples,
                   const std::vector<TrainingPair>& pairs,
                   const std::string& out_dir, uint64_t seed,
                   const Json& config_echo) {
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "objects", ec);
  if (ec) raise(ErrorCode::IoError, "cannot create " + out_dir);

  // Object order = first appearance in the sample list.
  std::vector<std::string> object_order;
  std::map<std::string, std::vector<const CuratedSample*>> by_object;
  for (const auto& s : samples) {
    if (!by_object.count(s->object_id)) object_order.push_back(s->object_id);
    by_object[s->object_id].push_back(s.get());
  }

  for (const auto& object_id : object_order) {
    const fs::path obj_dir = fs::path(out_dir) / "objects" / object_id;
    fs::create_directories(obj_dir, ec);
    if (ec) raise(ErrorCode::IoError, "cannot create " + obj_dir.string());
    Json index;
    index["format_version"] = kFormatVersion;
    index["object_id"] = object_id;
    index["frames"] = Json::array();
    for (const CuratedSample* s : by_object[object_id]) {
      write_png_rgb((obj_dir / (s->frame_id + ".png")).string(), s->crop);
      write_png_label((obj_dir / (s->frame_id + ".trimap.png")).string(),
                      trimap_to_buffer(s->trimap));
      write_json_file((obj_dir / (s->frame_id + ".pose.json")).string(),
                      sample_pose_json(*s));
      index["frames"].push_back(s->frame_id);
    }
    // Index written last: its presence marks the object directory complete.
    write_json_file((obj_dir / "index.json").string(), index);
  }

  std::ofstream pairs_out(fs::path(out_dir) / "pairs.jsonl");
  if (!pairs_out) raise(ErrorCode::IoError, "cannot write pairs.jsonl");
  for (const auto& p : pairs) {
    Json row;
    row["format_version"] = kFormatVersion;
    row["pair_id"] = p.pair_id;
    row["source"] = {{"object_id", p.source->object_id},
                     {"frame_id", p.source->frame_id}};
    row["target"] = {{"object_id", p.target->object_id},
                     {"frame_id", p.target->frame_id}};
    row["condition"] = condition_to_json(p.condition);
    row["d_azimuth_deg"] =
        relative_orbital(p.source->orbital, p.target->orbital).d_azimuth_rad *
        kRadToDeg;
    pairs_out << row.dump() << "\n";
  }
  pairs_out.close();

  Json top;
  top["format_version"] = kFormatVersion;
  top["objects"] = object_order;
  top["seed"] = seed;
  top["config"] = config_echo;
  write_json_file((fs::path(out_dir) / "dataset.json").string(), top);
}

DatasetReadResult read_dataset(const std::string& dir) {
  DatasetReadResult result;
  const Json top = parse_json_file((fs::path(dir) / "dataset.json").string());
  check_format_version(top, "dataset.json");
  result.seed = json_require<uint64_t>(top, "seed", "dataset.json");
  if (top.contains("config")) result.config_echo = top.at("config");

  std::map<std::string, std::map<std::string, SamplePtr>> loaded;
  for (const auto& object_id :
       json_require<std::vector<std::string>>(top, "objects", "dataset.json")) {
    const fs::path obj_dir = fs::path(dir) / "objects" / object_id;
    try {
      const Json index = parse_json_file((obj_dir / "index.json").string());
      check_format_version(index, "object index");
      for (const auto& frame_id :
           json_require<std::vector<std::string>>(index, "frames", "object index")) {
        auto s = std::make_shared<CuratedSample>();
        const Json pose =
            parse_json_file((obj_dir / (frame_id + ".pose.json")).string());
        check_format_version(pose, "pose.json");
        s->object_id = json_require<std::string>(pose, "object_id", "pose.json");
        s->frame_id = json_require<std::string>(pose, "frame_id", "pose.json");
        s->orbital = orbital_from_json(pose.at("orbital"), "pose.json");
        s->crop_intrinsics = camera_from_json(pose.at("crop_intrinsics"), "pose.json");
        s->flipped = json_require<bool>(pose, "flipped", "pose.json");
        s->scale_factor = json_require<double>(pose, "scale_factor", "pose.json");
        s->crop = read_png_rgb((obj_dir / (frame_id + ".png")).string());
        s->trimap = trimap_from_buffer(
            read_png_label((obj_dir / (frame_id + ".trimap.png")).string()));
        loaded[object_id][frame_id] = s;
        result.samples.push_back(loaded[object_id][frame_id]);
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::VersionMismatch) throw;
      result.incomplete_objects.push_back(object_id);
      // Drop any partially loaded samples of this object.
      std::erase_if(result.samples, [&](const SamplePtr& s) {
        return s->object_id == object_id;
      });
      loaded.erase(object_id);
    }
  }

  const fs::path pairs_path = fs::path(dir) / "pairs.jsonl";
  if (fs::exists(pairs_path)) {
    std::ifstream in(pairs_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      Json row = Json::parse(line, nullptr, false);
      if (row.is_discarded()) {
        raise(ErrorCode::ParseError, "invalid JSON line in pairs.jsonl");
      }
      check_format_version(row, "pairs.jsonl row");
      const std::string src_obj = row.at("source").at("object_id");
      const std::string src_frame = row.at("source").at("frame_id");
      const std::string trg_obj = row.at("target").at("object_id");
      const std::string trg_frame = row.at("target").at("frame_id");
      if (!loaded.count(src_obj) || !loaded[src_obj].count(src_frame) ||
          !loaded.count(trg_obj) || !loaded[trg_obj].count(trg_frame)) {
        ++result.skipped_pairs;
        continue;
      }
      TrainingPair p;
      p.pair_id = json_require<std::string>(row, "pair_id", "pairs.jsonl row");
      p.source = loaded[src_obj][src_frame];
      p.target = loaded[trg_obj][trg_frame];
      p.condition = condition_from_json(row.at("condition"), "pairs.jsonl row");
      // Rays and masks are derived data; rebuild them from the loaded poses.
      const RigidTransform w_src =
          orbital_to_camera(p.source->orbital, ObjectBox3D::identity());
      const RigidTransform w_trg =
          orbital_to_camera(p.target->orbital, ObjectBox3D::identity());
      p.rays = plucker_map(p.target->crop_intrinsics,
                           w_src.compose(w_trg.inverse()), 32, 32);
      p.target_mask = latent_mask(p.target->trimap);
      result.pairs.push_back(std::move(p));
    }
  }
  return result;
}

}  // namespace dcur
