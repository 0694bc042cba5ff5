#include "core/conditioning.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>

namespace dcur {

const char* pose_mode_name(PoseMode mode) {
  return mode == PoseMode::Relative ? "relative" : "absolute";
}

PoseMode pose_mode_from_name(const std::string& name) {
  if (name == "relative") return PoseMode::Relative;
  if (name == "absolute") return PoseMode::Absolute;
  raise(ErrorCode::InvalidConfig, "unknown pose mode: " + name);
}

GlobalPoseCondition encode_global(const OrbitalPose& src,
                                  const OrbitalPose& trg, PoseMode mode,
                                  double distance_scale) {
  src.validate();
  trg.validate();
  GlobalPoseCondition cond;
  cond.mode = mode;
  if (mode == PoseMode::Relative) {
    const RelativeOrbital rel = relative_orbital(src, trg);
    cond.values = {rel.d_elevation_rad, std::sin(rel.d_azimuth_rad),
                   std::cos(rel.d_azimuth_rad),
                   rel.d_distance_m * distance_scale};
  } else {
    cond.values = {src.elevation_rad,       wrap_angle(src.azimuth_rad),
                   src.distance_m * distance_scale,
                   trg.elevation_rad,       wrap_angle(trg.azimuth_rad),
                   trg.distance_m * distance_scale};
  }
  return cond;
}

PluckerMap plucker_map(const CameraModel& k,
                       const RigidTransform& target_to_source, int out_width,
                       int out_height) {
  if (out_width <= 0 || out_height <= 0) {
    raise(ErrorCode::InvalidArgument, "plucker_map: output dims must be > 0");
  }
  PluckerMap map;
  map.width = out_width;
  map.height = out_height;
  map.data.resize(static_cast<size_t>(out_width) * out_height * 6);

  // Target camera center expressed in the source frame.
  const Vec3 origin = target_to_source.translation;
  const double sx = static_cast<double>(k.width) / out_width;
  const double sy = static_cast<double>(k.height) / out_height;

  for (int y = 0; y < out_height; ++y) {
    const double v = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < out_width; ++x) {
      const double u = (x + 0.5) * sx - 0.5;
      const Vec3 dir_target((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const Vec3 d = (target_to_source.rotation * dir_target).normalized();
      const Vec3 m = origin.cross(d);
      double* out = map.pixel(x, y);
      out[0] = m.x();
      out[1] = m.y();
      out[2] = m.z();
      out[3] = d.x();
      out[4] = d.y();
      out[5] = d.z();
    }
  }
  return map;
}

bool plucker_shift_check(const PluckerMap& map, double lambda, double tol) {
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const double* p = map.pixel(x, y);
      const Vec3 m(p[0], p[1], p[2]);
      const Vec3 d(p[3], p[4], p[5]);
      // d x m is the ray point closest to the frame origin; any valid origin
      // works because the moment only depends on the ray, not the point.
      const Vec3 origin = d.cross(m) + lambda * d;
      const Vec3 m2 = origin.cross(d);
      if ((m2 - m).cwiseAbs().maxCoeff() > tol) return false;
    }
  }
  return true;
}

void write_plucker(const std::string& path, const PluckerMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot open for writing: " + path);
  const uint32_t header[3] = {static_cast<uint32_t>(map.width),
                              static_cast<uint32_t>(map.height), 6u};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  std::vector<float> row(static_cast<size_t>(map.width) * 6);
  for (int y = 0; y < map.height; ++y) {
    const double* src = map.pixel(0, y);
    for (size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>(src[i]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) raise(ErrorCode::IoError, "write failed: " + path);
}

PluckerMap read_plucker(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open for reading: " + path);
  uint32_t header[3] = {0, 0, 0};
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || header[2] != 6 || header[0] == 0 || header[1] == 0) {
    raise(ErrorCode::ParseError, "bad plucker header in " + path);
  }
  PluckerMap map;
  map.width = static_cast<int>(header[0]);
  map.height = static_cast<int>(header[1]);
  const size_t count = static_cast<size_t>(map.width) * map.height * 6;
  std::vector<float> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) raise(ErrorCode::ParseError, "truncated plucker data in " + path);
  map.data.assign(raw.begin(), raw.end());
  return map;
}

}  // namespace dcur
