#pragma once

#include <string>
#include <vector>

#include "core/geometry.hpp"

namespace dcur {

enum class PoseMode { Relative, Absolute };

const char* pose_mode_name(PoseMode mode);
PoseMode pose_mode_from_name(const std::string& name);

// Global pose conditioning payload. Relative mode packs
// (d_elevation, sin d_azimuth, cos d_azimuth, d_distance); absolute mode
// concatenates both orbital triples with wrapped azimuths.
struct GlobalPoseCondition {
  PoseMode mode = PoseMode::Relative;
  std::vector<double> values;  // 4 (relative) or 6 (absolute)
};

GlobalPoseCondition encode_global(const OrbitalPose& src,
                                  const OrbitalPose& trg, PoseMode mode,
                                  double distance_scale = 1.0);

// Per-pixel ray embedding (o x d, d) in the source-view camera frame; d is
// unit length, so m.d = 0 at every pixel.
struct PluckerMap {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // h*w*6 row-major: (mx,my,mz,dx,dy,dz)

  const double* pixel(int x, int y) const {
    return &data[(static_cast<size_t>(y) * width + x) * 6];
  }
  double* pixel(int x, int y) {
    return &data[(static_cast<size_t>(y) * width + x) * 6];
  }
};

// Rays of the target camera's pixels expressed in the source camera frame.
// target_to_source maps target-camera coordinates into the source frame.
// When (out_width, out_height) differ from the camera size, rays sample the
// covered cell centers (e.g. 32x32 output back-projects latent-cell centers).
PluckerMap plucker_map(const CameraModel& k,
                       const RigidTransform& target_to_source, int out_width,
                       int out_height);

// True iff rebuilding every pixel with its origin slid by lambda along the
// ray reproduces the stored 6-vectors within tol.
bool plucker_shift_check(const PluckerMap& map, double lambda,
                         double tol = 1e-9);

// Little-endian float32 serialization: header u32 (width, height, 6), then
// row-major pixel data. Conventional extension: .pluecker
void write_plucker(const std::string& path, const PluckerMap& map);
PluckerMap read_plucker(const std::string& path);

}  // namespace dcur
