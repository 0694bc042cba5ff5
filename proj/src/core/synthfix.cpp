#include "core/synthfix.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "core/png_io.hpp"
#include "core/rng.hpp"

namespace fs = std::filesystem;

namespace dcur {

namespace {

struct ScenePoint {
  Vec3 world;
  std::array<float, 3> color;
  int class_id = 0;
  int instance_id = 0;
  bool is_object = false;
};

int grid_count(double extent, double spacing) {
  return std::max(2, static_cast<int>(std::floor(extent / spacing)) + 1);
}

void add_face(std::vector<ScenePoint>& points, const SceneSpec& scene,
              int axis, int sign, const std::array<float, 3>& color) {
  const Vec3 half = scene.box.dimensions / 2.0;
  const int a1 = (axis + 1) % 3;
  const int a2 = (axis + 2) % 3;
  const int n1 = grid_count(scene.box.dimensions(a1), scene.point_spacing_m);
  const int n2 = grid_count(scene.box.dimensions(a2), scene.point_spacing_m);
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      Vec3 p_obj = Vec3::Zero();
      p_obj(axis) = sign * half(axis);
      p_obj(a1) = -half(a1) + scene.box.dimensions(a1) * i / (n1 - 1);
      p_obj(a2) = -half(a2) + scene.box.dimensions(a2) * j / (n2 - 1);
      ScenePoint sp;
      sp.world = scene.box.center_world + scene.box.heading_world * p_obj;
      sp.color = color;
      sp.class_id = scene.object_class_id;
      sp.instance_id = scene.object_instance_id;
      sp.is_object = true;
      points.push_back(sp);
    }
  }
}

std::vector<ScenePoint> build_points(const SceneSpec& scene,
                                     const RigidTransform& cam,
                                     const CameraModel& k) {
  std::vector<ScenePoint> points;
  const int faces[6][2] = {{0, 1}, {0, -1}, {1, 1}, {1, -1}, {2, 1}, {2, -1}};
  for (int f = 0; f < 6; ++f) {
    add_face(points, scene, faces[f][0], faces[f][1], scene.face_colors[f]);
  }

  if (scene.occluder) {
    const OccluderSpec& occ = *scene.occluder;
    const Vec3 cam_center = cam.camera_center();
    const double dist = (scene.box.center_world - cam_center).norm();
    const double depth = occ.depth_frac * dist;
    // ~1.5 px projected spacing keeps the splatted disc hole-free.
    const double spacing = std::max(1e-3, 1.5 * depth / k.fx);
    const int n = grid_count(2.0 * occ.radius_m, spacing);
    const RigidTransform cam_to_world = cam.inverse();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double dx = -occ.radius_m + 2.0 * occ.radius_m * i / (n - 1);
        const double dy = -occ.radius_m + 2.0 * occ.radius_m * j / (n - 1);
        if (dx * dx + dy * dy > occ.radius_m * occ.radius_m) continue;
        ScenePoint sp;
        sp.world = cam_to_world.apply(
            Vec3(occ.offset_x_m + dx, occ.offset_y_m + dy, depth));
        sp.color = occ.color;
        sp.class_id = occ.class_id;
        sp.instance_id = occ.instance_id;
        sp.is_object = false;
        points.push_back(sp);
      }
    }
  }
  return points;
}

}  // namespace

SceneSpec SceneSpec::cuboid_variant(int variant, double point_spacing_m) {
  SceneSpec scene;
  const double f = 0.8 + 0.08 * (variant % 6);
  scene.box.center_world = Vec3(6.0 * variant, 3.0 * variant, 0.0);
  scene.box.dimensions = Vec3(4.2 * f, 1.9 * f, 1.55 * f);
  scene.box.heading_world =
      Eigen::AngleAxisd(0.35 * variant, Vec3::UnitZ()).toRotationMatrix();
  scene.point_spacing_m = point_spacing_m;
  scene.object_instance_id = 1;

  // Face-distinct colors so viewpoint is recoverable from pixels; hue-shifted
  // per variant so shapes are tellable apart.
  const float shift = 0.09f * static_cast<float>(variant % 7);
  auto c = [&](float r, float g, float b) -> std::array<float, 3> {
    auto wrap01 = [](float v) { return v - std::floor(v); };
    return {wrap01(r + shift), wrap01(g + shift * 0.5f), wrap01(b + shift * 0.25f)};
  };
  scene.face_colors = {c(0.9f, 0.15f, 0.1f), c(0.1f, 0.7f, 0.2f),
                       c(0.15f, 0.25f, 0.9f), c(0.9f, 0.85f, 0.1f),
                       c(0.1f, 0.85f, 0.9f), c(0.95f, 0.5f, 0.1f)};
  return scene;
}

RenderResult render_points(const SceneSpec& scene, const RigidTransform& cam,
                           const CameraModel& k) {
  RenderResult out;
  out.image = ImageBuffer(k.width, k.height, 3, 1.0f);  // white background
  out.semantic = ImageBuffer(k.width, k.height, 1, 0.0f);
  out.instance = ImageBuffer(k.width, k.height, 1, 0.0f);

  const std::vector<ScenePoint> points = build_points(scene, cam, k);
  std::vector<double> zbuf(static_cast<size_t>(k.width) * k.height, 1e300);

  for (size_t idx = 0; idx < points.size(); ++idx) {
    const ScenePoint& sp = points[idx];
    const Vec3 p = cam.apply(sp.world);
    if (p.z() <= 1e-6) continue;
    const double u = k.fx * p.x() / p.z() + k.cx;
    const double v = k.fy * p.y() / p.z() + k.cy;
    if (u < 0.0 || u > k.width - 1 || v < 0.0 || v > k.height - 1) continue;

    PointProjection proj;
    proj.u = u;
    proj.v = v;
    proj.depth = p.z();
    proj.is_object = sp.is_object;
    proj.point_index = idx;
    out.projections.push_back(proj);

    // Splat footprint scales with projected point spacing.
    const int r = std::max(
        1, static_cast<int>(std::ceil(0.75 * scene.point_spacing_m * k.fx /
                                      p.z())));
    const int x0 = std::max(0, static_cast<int>(std::floor(u)) - r);
    const int x1 = std::min(k.width - 1, static_cast<int>(std::ceil(u)) + r);
    const int y0 = std::max(0, static_cast<int>(std::floor(v)) - r);
    const int y1 = std::min(k.height - 1, static_cast<int>(std::ceil(v)) + r);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const size_t i = static_cast<size_t>(y) * k.width + x;
        if (p.z() < zbuf[i]) {
          zbuf[i] = p.z();
          out.image.at(x, y, 0) = sp.color[0];
          out.image.at(x, y, 1) = sp.color[1];
          out.image.at(x, y, 2) = sp.color[2];
          out.semantic.at(x, y, 0) = static_cast<float>(sp.class_id);
          out.instance.at(x, y, 0) = static_cast<float>(sp.instance_id);
        }
      }
    }
  }
  return out;
}

std::vector<RigidTransform> orbit_cameras(const ObjectBox3D& box,
                                          const std::vector<OrbitalPose>& poses) {
  std::vector<RigidTransform> cams;
  cams.reserve(poses.size());
  for (const auto& pose : poses) {
    cams.push_back(orbital_to_camera(pose, box));
  }
  return cams;
}

DrivingLogManifest make_toy_dataset(const RunConfig& config,
                                    const std::string& out_dir) {
  const SynthConfig& sc = config.synth;
  std::error_code ec;
  for (const char* sub : {"images", "semantic", "instance"}) {
    fs::create_directories(fs::path(out_dir) / sub, ec);
    if (ec) raise(ErrorCode::IoError, "cannot create " + out_dir);
  }

  CameraModel k;
  k.fx = k.fy = sc.focal_px;
  k.cx = sc.image_width / 2.0;
  k.cy = sc.image_height / 2.0;
  k.width = sc.image_width;
  k.height = sc.image_height;

  DrivingLogManifest m;
  m.base_dir = out_dir;
  m.cameras.push_back({"cam0", k});
  m.label_classes = {{0, "void"}, {1, "car"}, {2, "vegetation"}};

  std::vector<double> distances = {sc.distance_m};
  if (sc.second_distance_m > 0.0) distances.push_back(sc.second_distance_m);

  for (int variant = 0; variant < sc.shapes; ++variant) {
    SceneSpec scene = SceneSpec::cuboid_variant(variant, sc.point_spacing_m);
    if (sc.occluder_enabled) {
      OccluderSpec occ;
      occ.radius_m = sc.occluder_radius_m;
      occ.depth_frac = sc.occluder_depth_frac;
      occ.offset_x_m = sc.occluder_offset_x_m;
      occ.offset_y_m = sc.occluder_offset_y_m;
      scene.occluder = occ;
    }

    char obj_id[32];
    std::snprintf(obj_id, sizeof(obj_id), "obj%02d", variant);
    ManifestObject obj;
    obj.id = obj_id;
    obj.class_name = "car";
    obj.instance_id = scene.object_instance_id;

    int frame_counter = 0;
    for (double distance : distances) {
      for (int i = 0; i < sc.azimuth_steps; ++i, ++frame_counter) {
        OrbitalPose pose;
        pose.elevation_rad = sc.elevation_deg * kDegToRad;
        pose.azimuth_rad = wrap_angle(2.0 * kPi * i / sc.azimuth_steps);
        pose.distance_m = distance;

        RigidTransform cam = orbital_to_camera(pose, scene.box);
        if (sc.camera_jitter_deg > 0.0) {
          Rng rng(seed_for(config.seed, "synth_jitter",
                           static_cast<uint64_t>(variant),
                           static_cast<uint64_t>(frame_counter)));
          Vec3 axis(rng.normal(), rng.normal(), rng.normal());
          if (axis.norm() < 1e-9) axis = Vec3::UnitX();
          const double angle =
              rng.uniform(-sc.camera_jitter_deg, sc.camera_jitter_deg) *
              kDegToRad;
          const Mat3 jitter =
              Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
          // Rotation about the camera center keeps the orbital pose intact.
          cam.rotation = jitter * cam.rotation;
          cam.translation = jitter * cam.translation;
        }

        const RenderResult render = render_points(scene, cam, k);

        char frame_id[48];
        std::snprintf(frame_id, sizeof(frame_id), "%s_f%03d", obj_id,
                      frame_counter);
        const std::string image_rel = std::string("images/") + frame_id + ".png";
        const std::string sem_rel = std::string("semantic/") + frame_id + ".png";
        const std::string inst_rel = std::string("instance/") + frame_id + ".png";
        write_png_rgb((fs::path(out_dir) / image_rel).string(), render.image);
        write_png_label((fs::path(out_dir) / sem_rel).string(), render.semantic);
        write_png_label((fs::path(out_dir) / inst_rel).string(), render.instance);

        ManifestFrame frame;
        frame.id = frame_id;
        frame.camera_id = "cam0";
        frame.timestamp = frame_counter * 0.1;
        frame.image_path = image_rel;
        frame.semantic_path = sem_rel;
        frame.instance_path = inst_rel;
        frame.world_to_camera = cam;
        m.frames.push_back(frame);

        TrackEntry entry;
        entry.frame_id = frame_id;
        entry.box = scene.box;
        entry.gt_orbital = pose;
        obj.track.push_back(entry);
      }
    }
    m.objects.push_back(std::move(obj));
  }

  write_json_file((fs::path(out_dir) / "manifest.json").string(),
                  manifest_to_json(m));
  return m;
}

}  // namespace dcur
