#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "core/errors.hpp"

namespace dcur {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

// Tolerance below which a camera counts as sitting on the orbital pole
// (azimuth undefined) and is rejected rather than given a conventional value.
inline constexpr double kPoleEpsilonRad = 1e-6;
inline constexpr double kMinDistanceM = 1e-6;

// Wraps an angle to (-pi, pi].
double wrap_angle(double rad);

// Pinhole intrinsics. Pixel (u, v) = (fx*X/Z + cx, fy*Y/Z + cy); pixel
// centers sit at integer coordinates.
struct CameraModel {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  Mat3 matrix() const;
  Mat3 inverse_matrix() const;
  void validate() const;  // throws InvalidArgument on a violated invariant
};

// Rigid motion p -> rotation*p + translation. Camera poses are stored as
// world-to-camera transforms: x_cam = R*x_world + t, camera center -R^T*t.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
  // this after other: (this*other)(p) = this(other(p))
  RigidTransform compose(const RigidTransform& other) const;
  Vec3 camera_center() const { return -(rotation.transpose() * translation); }
  bool is_orthonormal(double tol = 1e-9) const;
  void validate() const;
};

// Canonical camera pose triple: elevation, azimuth, distance of the camera
// center in the object frame. azimuth is measured from the object x-axis
// (vehicle front), elevation from the horizontal plane toward the object
// z-axis (up).
struct OrbitalPose {
  double elevation_rad = 0.0;
  double azimuth_rad = 0.0;
  double distance_m = 0.0;

  void validate() const;
};

// Annotated 3D object box. heading_world maps object-frame directions to
// world directions (object x-axis = vehicle front, z-axis = up).
struct ObjectBox3D {
  Vec3 center_world = Vec3::Zero();
  Vec3 dimensions = Vec3::Ones();  // length, width, height (m)
  Mat3 heading_world = Mat3::Identity();

  void validate() const;
  static ObjectBox3D identity();
};

struct RelativeOrbital {
  double d_elevation_rad = 0.0;
  double d_azimuth_rad = 0.0;  // wrapped to (-pi, pi]
  double d_distance_m = 0.0;
};

enum class AzimuthBucket { B0To30, B30To60, B60To180 };

const char* azimuth_bucket_name(AzimuthBucket bucket);

// Recovers the orbital pose of a camera relative to the annotated box.
// Throws CoincidentCenters when the centers collide and PoleDegenerate when
// the camera sits within kPoleEpsilonRad of straight above/below the object.
OrbitalPose orbital_from_camera(const RigidTransform& world_to_camera,
                                const ObjectBox3D& box);

// Builds the orbital camera for a pose: optical axis through the box center,
// zero roll about the axis with respect to the object z-axis.
RigidTransform orbital_to_camera(const OrbitalPose& pose,
                                 const ObjectBox3D& box);

// Rotation R such that R applied to the camera orientation (center fixed)
// turns it into the orbital camera of its own recovered pose.
Mat3 virtual_rotation(const RigidTransform& world_to_camera,
                      const ObjectBox3D& box);

// H = K_dst * rot * K_src^-1, scaled so H(2,2) = 1. For cameras sharing a
// center this maps source pixels of any scene point to destination pixels.
Mat3 rotational_homography(const CameraModel& k_src, const CameraModel& k_dst,
                           const Mat3& rot);

// Componentwise trg - src with the azimuth difference wrapped.
RelativeOrbital relative_orbital(const OrbitalPose& src,
                                 const OrbitalPose& trg);

// Buckets |wrap(d_azimuth)| in degrees: [0,30) / [30,60) / [60,180].
AzimuthBucket azimuth_bucket(double d_azimuth_rad);

}  // namespace dcur
