#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "core/curation.hpp"
#include "core/geometry.hpp"
#include "core/image_buffer.hpp"
#include "core/run_config.hpp"

namespace dcur {

// Flat occluder disc held at a fixed position in the camera frame, so it
// lands on the same crop region in every view.
struct OccluderSpec {
  double radius_m = 1.0;
  double depth_frac = 0.5;  // distance along the optical axis, as a fraction
                            // of the camera-to-object distance
  double offset_x_m = 0.0;
  double offset_y_m = 0.0;
  std::array<float, 3> color = {1.0f, 0.0f, 1.0f};
  int class_id = 2;
  int instance_id = 200;
};

// Textured cuboid point set with known box and exact projections: the
// brute-force reference scene for the geometric checks and the toy trainer.
struct SceneSpec {
  ObjectBox3D box;
  std::array<std::array<float, 3>, 6> face_colors;  // +x,-x,+y,-y,+z,-z
  double point_spacing_m = 0.05;
  int object_class_id = 1;
  int object_instance_id = 1;
  std::optional<OccluderSpec> occluder;

  static SceneSpec cuboid_variant(int variant, double point_spacing_m);
};

struct PointProjection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  bool is_object = false;
  size_t point_index = 0;  // stable across renders of the same scene/camera
};

struct RenderResult {
  ImageBuffer image;     // RGB, white background
  ImageBuffer semantic;  // 1-channel class ids
  ImageBuffer instance;  // 1-channel instance ids
  std::vector<PointProjection> projections;  // exact pinhole projections of
                                             // every in-frustum point
};

// Z-buffered point-splat render. Stored projections are the exact pinhole
// values; splatting only affects pixels.
RenderResult render_points(const SceneSpec& scene, const RigidTransform& cam,
                           const CameraModel& k);

// Orbital cameras for a pose list (PoleDegenerate propagates).
std::vector<RigidTransform> orbit_cameras(const ObjectBox3D& box,
                                          const std::vector<OrbitalPose>& poses);

// Renders config.synth scenes over an orbit grid into out_dir and writes a
// manifest consumable by curation unchanged. Cameras are jittered off the
// exact orbital orientation (center preserved) so canonicalization has real
// work to do; the ground-truth orbital pose rides along in the track entries.
DrivingLogManifest make_toy_dataset(const RunConfig& config,
                                    const std::string& out_dir);

}  // namespace dcur
