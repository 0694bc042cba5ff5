#include "core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dcur {

double wrap_angle(double rad) {
  double w = std::remainder(rad, 2.0 * kPi);  // lands in [-pi, pi]
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

Mat3 CameraModel::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Mat3 CameraModel::inverse_matrix() const {
  Mat3 k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

void CameraModel::validate() const {
  std::ostringstream bad;
  if (!(fx > 0.0)) bad << " fx=" << fx;
  if (!(fy > 0.0)) bad << " fy=" << fy;
  if (!(cx >= 0.0 && cx < width)) bad << " cx=" << cx;
  if (!(cy >= 0.0 && cy < height)) bad << " cy=" << cy;
  if (width <= 0 || height <= 0) bad << " size=" << width << "x" << height;
  if (!bad.str().empty()) {
    raise(ErrorCode::InvalidArgument, "invalid camera model:" + bad.str());
  }
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(rotation.transpose() * translation);
  return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& other) const {
  RigidTransform out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

bool RigidTransform::is_orthonormal(double tol) const {
  const Mat3 gram = rotation.transpose() * rotation;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

void RigidTransform::validate() const {
  if (!is_orthonormal()) {
    raise(ErrorCode::InvalidArgument,
          "rotation is not orthonormal with det +1 within 1e-9");
  }
}

void OrbitalPose::validate() const {
  std::ostringstream bad;
  if (!(elevation_rad >= -kPi / 2 && elevation_rad <= kPi / 2)) {
    bad << " elevation_rad=" << elevation_rad;
  }
  if (!(azimuth_rad > -kPi && azimuth_rad <= kPi)) {
    bad << " azimuth_rad=" << azimuth_rad;
  }
  if (!(distance_m > 0.0)) bad << " distance_m=" << distance_m;
  if (!bad.str().empty()) {
    raise(ErrorCode::InvalidArgument, "invalid orbital pose:" + bad.str());
  }
}

void ObjectBox3D::validate() const {
  if (!(dimensions.minCoeff() > 0.0)) {
    raise(ErrorCode::InvalidArgument, "object box dimensions must be > 0");
  }
  RigidTransform heading{heading_world, Vec3::Zero()};
  if (!heading.is_orthonormal()) {
    raise(ErrorCode::InvalidArgument, "object box heading is not orthonormal");
  }
}

ObjectBox3D ObjectBox3D::identity() { return ObjectBox3D{}; }

const char* azimuth_bucket_name(AzimuthBucket bucket) {
  switch (bucket) {
    case AzimuthBucket::B0To30:   return "0-30";
    case AzimuthBucket::B30To60:  return "30-60";
    case AzimuthBucket::B60To180: return "60-180";
  }
  return "60-180";
}

OrbitalPose orbital_from_camera(const RigidTransform& world_to_camera,
                                const ObjectBox3D& box) {
  const Vec3 center_world = world_to_camera.camera_center();
  const Vec3 e = box.heading_world.transpose() * (center_world - box.center_world);
  const double z = e.norm();
  if (z < kMinDistanceM) {
    raise(ErrorCode::CoincidentCenters,
          "camera center coincides with object center (distance < 1e-6 m)");
  }
  const double s = std::clamp(e.z() / z, -1.0, 1.0);
  const double elevation = std::asin(s);
  if (kPi / 2 - std::abs(elevation) < kPoleEpsilonRad) {
    raise(ErrorCode::PoleDegenerate,
          "camera within 1e-6 rad of the orbital pole; azimuth undefined");
  }
  OrbitalPose pose;
  pose.elevation_rad = elevation;
  pose.azimuth_rad = std::atan2(e.y(), e.x());
  pose.distance_m = z;
  return pose;
}

RigidTransform orbital_to_camera(const OrbitalPose& pose,
                                 const ObjectBox3D& box) {
  pose.validate();
  const double ca = std::cos(pose.elevation_rad);
  const Vec3 e = pose.distance_m * Vec3(ca * std::cos(pose.azimuth_rad),
                                        ca * std::sin(pose.azimuth_rad),
                                        std::sin(pose.elevation_rad));
  const Vec3 center = box.center_world + box.heading_world * e;

  const Vec3 forward = (box.center_world - center).normalized();
  const Vec3 up_ref = box.heading_world.col(2);
  const Vec3 up_perp = up_ref - up_ref.dot(forward) * forward;
  if (up_perp.norm() < 1e-12) {
    raise(ErrorCode::PoleDegenerate,
          "optical axis parallel to the object up axis; roll undefined");
  }
  const Vec3 down = -up_perp.normalized();
  const Vec3 right = down.cross(forward);

  RigidTransform cam;
  cam.rotation.row(0) = right;
  cam.rotation.row(1) = down;
  cam.rotation.row(2) = forward;
  cam.translation = -(cam.rotation * center);
  return cam;
}

Mat3 virtual_rotation(const RigidTransform& world_to_camera,
                      const ObjectBox3D& box) {
  const OrbitalPose pose = orbital_from_camera(world_to_camera, box);
  const RigidTransform orbital = orbital_to_camera(pose, box);
  return orbital.rotation * world_to_camera.rotation.transpose();
}

Mat3 rotational_homography(const CameraModel& k_src, const CameraModel& k_dst,
                           const Mat3& rot) {
  const Mat3 h = k_dst.matrix() * rot * k_src.inverse_matrix();
  if (std::abs(h(2, 2)) < 1e-12) {
    std::ostringstream msg;
    msg << "homography not normalizable, |H(2,2)| < 1e-12; unnormalized H = ["
        << h << "]";
    raise(ErrorCode::NumericallySingular, msg.str());
  }
  return h / h(2, 2);
}

RelativeOrbital relative_orbital(const OrbitalPose& src,
                                 const OrbitalPose& trg) {
  RelativeOrbital rel;
  rel.d_elevation_rad = trg.elevation_rad - src.elevation_rad;
  rel.d_azimuth_rad = wrap_angle(trg.azimuth_rad - src.azimuth_rad);
  rel.d_distance_m = trg.distance_m - src.distance_m;
  return rel;
}

AzimuthBucket azimuth_bucket(double d_azimuth_rad) {
  // Compared in radians so exact degree boundaries built via kDegToRad land
  // in the half-open upper bucket.
  const double mag = std::abs(wrap_angle(d_azimuth_rad));
  if (mag < 30.0 * kDegToRad) return AzimuthBucket::B0To30;
  if (mag < 60.0 * kDegToRad) return AzimuthBucket::B30To60;
  return AzimuthBucket::B60To180;
}

}  // namespace dcur
