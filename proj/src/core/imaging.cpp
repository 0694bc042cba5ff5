#include "core/imaging.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace dcur {

namespace {

Mat3 checked_inverse(const Mat3& h) {
  Eigen::JacobiSVD<Mat3> svd(h);
  const double smin = svd.singularValues()(2);
  const double smax = svd.singularValues()(0);
  if (!(smin > 0.0) || smax / smin >= 1e12) {
    raise(ErrorCode::SingularHomography,
          "homography is not invertible (condition number >= 1e12)");
  }
  return h.inverse();
}

float sample_bilinear(const ImageBuffer& src, double u, double v, int c) {
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  const double fx = u - x0;
  const double fy = v - y0;
  const int x1 = std::min(x0 + 1, src.width - 1);
  const int y1 = std::min(y0 + 1, src.height - 1);
  const double top = (1.0 - fx) * src.at(x0, y0, c) + fx * src.at(x1, y0, c);
  const double bot = (1.0 - fx) * src.at(x0, y1, c) + fx * src.at(x1, y1, c);
  return static_cast<float>((1.0 - fy) * top + fy * bot);
}

}  // namespace

ImageBuffer warp_image(const ImageBuffer& src, const Mat3& h, int out_width,
                       int out_height, const std::array<float, 3>& fill) {
  if (out_width <= 0 || out_height <= 0 || src.width <= 0 || src.height <= 0) {
    raise(ErrorCode::InvalidArgument, "warp_image: empty source or output");
  }
  const Mat3 hinv = checked_inverse(h);
  const bool categorical = src.channels == 1;

  ImageBuffer out(out_width, out_height, src.channels);
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const Vec3 p = hinv * Vec3(x, y, 1.0);
      bool inside = std::abs(p.z()) > 1e-15;
      double u = 0.0, v = 0.0;
      if (inside) {
        // 1e-9 px slack so exact-boundary pullbacks are not lost to rounding.
        constexpr double kEdgeTol = 1e-9;
        u = p.x() / p.z();
        v = p.y() / p.z();
        inside = u >= -kEdgeTol && u <= src.width - 1 + kEdgeTol &&
                 v >= -kEdgeTol && v <= src.height - 1 + kEdgeTol;
        u = std::clamp(u, 0.0, static_cast<double>(src.width - 1));
        v = std::clamp(v, 0.0, static_cast<double>(src.height - 1));
      }
      if (!inside) {
        for (int c = 0; c < src.channels; ++c) out.at(x, y, c) = fill[c % 3];
        continue;
      }
      if (categorical) {
        const int xi = static_cast<int>(std::lround(u));
        const int yi = static_cast<int>(std::lround(v));
        out.at(x, y, 0) = src.at(std::min(xi, src.width - 1),
                                 std::min(yi, src.height - 1), 0);
      } else {
        for (int c = 0; c < src.channels; ++c) {
          out.at(x, y, c) = sample_bilinear(src, u, v, c);
        }
      }
    }
  }
  return out;
}

Mat3 fixed_fov_homography(const CameraModel& k_src, double fov_deg,
                          const Mat3& rot, CameraModel* crop_intrinsics) {
  if (!(fov_deg > 10.0 && fov_deg < 120.0)) {
    raise(ErrorCode::InvalidArgument,
          "fixed-FOV crop requires fov_deg in (10, 120)");
  }
  CameraModel k_crop;
  k_crop.fx = k_crop.fy = kCropSize / 2.0 / std::tan(fov_deg * kDegToRad / 2.0);
  k_crop.cx = k_crop.cy = kCropSize / 2.0;
  k_crop.width = k_crop.height = kCropSize;
  if (crop_intrinsics) *crop_intrinsics = k_crop;
  return k_crop.matrix() * rot * k_src.inverse_matrix();
}

CropResult crop_fixed_fov(const ImageBuffer& src, const CameraModel& k_rotated,
                          double fov_deg, const std::array<float, 3>& fill) {
  CropResult res;
  const Mat3 h =
      fixed_fov_homography(k_rotated, fov_deg, Mat3::Identity(), &res.intrinsics);
  res.image = warp_image(src, h, kCropSize, kCropSize, fill);
  res.scale_factor = res.intrinsics.fx / k_rotated.fx;
  return res;
}

Mat3 adaptive_homography(const CameraModel& k_src,
                         const std::array<double, 4>& bbox2d,
                         double expand_ratio, const Mat3& rot,
                         CameraModel* crop_intrinsics, double* scale_factor) {
  const double bw = bbox2d[2];
  const double bh = bbox2d[3];
  if (std::max(bw, bh) < 2.0) {
    std::ostringstream msg;
    msg << "adaptive crop box degenerate: max(w,h) = " << std::max(bw, bh)
        << " px < 2 px";
    raise(ErrorCode::DegenerateBox, msg.str());
  }
  if (expand_ratio < 1.0) {
    raise(ErrorCode::InvalidArgument, "expand_ratio must be >= 1");
  }
  if (bbox2d[0] + bw < 0.0 || bbox2d[0] > k_src.width || bbox2d[1] + bh < 0.0 ||
      bbox2d[1] > k_src.height) {
    raise(ErrorCode::InvalidArgument, "bbox2d does not intersect the image");
  }
  const double side = expand_ratio * std::max(bw, bh);
  const double cx = bbox2d[0] + bw / 2.0;
  const double cy = bbox2d[1] + bh / 2.0;
  const double x0 = cx - side / 2.0;
  const double y0 = cy - side / 2.0;
  const double s = static_cast<double>(kCropSize) / side;

  Mat3 scale;
  scale << s, 0.0, -s * x0, 0.0, s, -s * y0, 0.0, 0.0, 1.0;
  CameraModel k_crop;
  k_crop.fx = s * k_src.fx;
  k_crop.fy = s * k_src.fy;
  k_crop.cx = s * (k_src.cx - x0);
  k_crop.cy = s * (k_src.cy - y0);
  k_crop.width = k_crop.height = kCropSize;
  if (crop_intrinsics) *crop_intrinsics = k_crop;
  if (scale_factor) *scale_factor = s;
  return scale * k_src.matrix() * rot * k_src.inverse_matrix();
}

CropResult crop_adaptive(const ImageBuffer& src, const CameraModel& k_rotated,
                         const std::array<double, 4>& bbox2d,
                         double expand_ratio, const std::array<float, 3>& fill) {
  CropResult res;
  const Mat3 h = adaptive_homography(k_rotated, bbox2d, expand_ratio,
                                     Mat3::Identity(), &res.intrinsics,
                                     &res.scale_factor);
  res.image = warp_image(src, h, kCropSize, kCropSize, fill);
  return res;
}

}  // namespace dcur
