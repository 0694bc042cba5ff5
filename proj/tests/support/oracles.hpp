#pragma once

// Independent reference computations for the test suites. Everything here is
// deliberately written from the defining formulas, without touching the
// implementation paths it is used to check.

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <vector>

#include "core/geometry.hpp"
#include "core/image_buffer.hpp"

namespace oracle {

using dcur::CameraModel;
using dcur::Mat3;
using dcur::RigidTransform;
using dcur::Vec3;

// Camera center from spherical coordinates about a box, straight from the
// textbook formula (world frame, identity heading assumed by the caller or
// applied outside).
inline Vec3 spherical_center(double elevation, double azimuth, double radius) {
  return Vec3(radius * std::cos(elevation) * std::cos(azimuth),
              radius * std::cos(elevation) * std::sin(azimuth),
              radius * std::sin(elevation));
}

// Pinhole projection of a world point through a world-to-camera transform.
inline Eigen::Vector2d project(const RigidTransform& cam, const CameraModel& k,
                               const Vec3& p_world) {
  const Vec3 p = cam.rotation * p_world + cam.translation;
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

// Apply a homography to a pixel.
inline Eigen::Vector2d map_pixel(const Mat3& h, double u, double v) {
  const Vec3 q = h * Vec3(u, v, 1.0);
  return {q.x() / q.z(), q.y() / q.z()};
}

// Plain-loop PSNR over valid pixels.
inline double psnr_direct(const dcur::ImageBuffer& a, const dcur::ImageBuffer& b,
                          const dcur::ImageBuffer& valid) {
  double sum = 0.0;
  size_t n = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (valid.at(x, y, 0) == 0.0f) continue;
      for (int c = 0; c < a.channels; ++c) {
        const double d = double(a.at(x, y, c)) - double(b.at(x, y, c));
        sum += d * d;
        ++n;
      }
    }
  }
  const double mse = sum / double(n);
  if (mse == 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

// Direct per-window Gaussian-weighted SSIM (no separable shortcut).
inline double ssim_direct(const dcur::ImageBuffer& a, const dcur::ImageBuffer& b,
                          const dcur::ImageBuffer& valid) {
  constexpr int W = 11, H = 5;
  constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  double kernel[W][W];
  double ksum = 0.0;
  for (int i = 0; i < W; ++i) {
    for (int j = 0; j < W; ++j) {
      const double dy = i - H, dx = j - H;
      kernel[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
      ksum += kernel[i][j];
    }
  }
  for (auto& row : kernel)
    for (auto& v : row) v /= ksum;

  double total = 0.0;
  size_t windows = 0;
  for (int c = 0; c < a.channels; ++c) {
    for (int cy = H; cy < a.height - H; ++cy) {
      for (int cx = H; cx < a.width - H; ++cx) {
        bool ok = true;
        for (int i = -H; i <= H && ok; ++i) {
          for (int j = -H; j <= H; ++j) {
            if (valid.at(cx + j, cy + i, 0) == 0.0f) {
              ok = false;
              break;
            }
          }
        }
        if (!ok) continue;
        double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
        for (int i = -H; i <= H; ++i) {
          for (int j = -H; j <= H; ++j) {
            const double w = kernel[i + H][j + H];
            const double va = a.at(cx + j, cy + i, c);
            const double vb = b.at(cx + j, cy + i, c);
            ma += w * va;
            mb += w * vb;
            maa += w * va * va;
            mbb += w * vb * vb;
            mab += w * va * vb;
          }
        }
        const double var_a = maa - ma * ma;
        const double var_b = mbb - mb * mb;
        const double cov = mab - ma * mb;
        total += ((2 * ma * mb + C1) * (2 * cov + C2)) /
                 ((ma * ma + mb * mb + C1) * (var_a + var_b + C2));
        ++windows;
      }
    }
  }
  return total / double(windows);
}

// Random rotation from a seeded generator (axis-angle construction).
template <typename RngT>
Mat3 random_rotation(RngT& rng) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  while (axis.norm() < 1e-6) axis = Vec3(rng.normal(), rng.normal(), rng.normal());
  const double angle = rng.uniform(-dcur::kPi, dcur::kPi);
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace oracle
