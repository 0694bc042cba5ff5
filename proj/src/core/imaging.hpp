#pragma once

#include <array>

#include "core/geometry.hpp"
#include "core/image_buffer.hpp"

namespace dcur {

struct CropResult {
  ImageBuffer image;        // exactly 256x256
  CameraModel intrinsics;   // intrinsics of the crop
  double scale_factor = 0;  // crop focal / source focal
};

inline constexpr int kCropSize = 256;
inline constexpr std::array<float, 3> kFillWhite = {1.0f, 1.0f, 1.0f};

// Inverse warp: destination pixel (u,v) samples the source at H^-1 (u,v,1).
// 3-channel buffers sample bilinearly, 1-channel (categorical) buffers use
// nearest neighbor; destinations whose pullback leaves the source take fill.
// Throws SingularHomography when h is not invertible (condition >= 1e12).
ImageBuffer warp_image(const ImageBuffer& src, const Mat3& h, int out_width,
                       int out_height,
                       const std::array<float, 3>& fill = kFillWhite);

// Fixed-FOV strategy: recrops to 256x256 with focal 128/tan(fov/2) and
// principal point (128,128). Object scale varies with distance.
CropResult crop_fixed_fov(const ImageBuffer& src, const CameraModel& k_rotated,
                          double fov_deg,
                          const std::array<float, 3>& fill = kFillWhite);

// Homography realizing crop_fixed_fov for the given source intrinsics,
// optionally composed with a preceding camera rotation. Exposed so curation
// can warp image and label maps with one combined transform.
Mat3 fixed_fov_homography(const CameraModel& k_src, double fov_deg,
                          const Mat3& rot, CameraModel* crop_intrinsics);

// Adaptive strategy: square region of side expand_ratio*max(w,h) centered on
// the bbox center, resized to 256x256 (varying focal). Throws DegenerateBox
// when max(w,h) < 2 px. Regions exceeding the image pad with fill.
CropResult crop_adaptive(const ImageBuffer& src, const CameraModel& k_rotated,
                         const std::array<double, 4>& bbox2d,
                         double expand_ratio,
                         const std::array<float, 3>& fill = kFillWhite);

Mat3 adaptive_homography(const CameraModel& k_src,
                         const std::array<double, 4>& bbox2d,
                         double expand_ratio, const Mat3& rot,
                         CameraModel* crop_intrinsics, double* scale_factor);

}  // namespace dcur
