#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/geometry.hpp"
#include "core/image_buffer.hpp"
#include "core/occlusion.hpp"

namespace dcur {

inline constexpr double kPsnrCapDb = 99.0;

// Validity mask: 1-channel buffer, nonzero = pixel participates in metrics.
ImageBuffer valid_from_trimap(const Trimap& trimap);
ImageBuffer all_valid(int width, int height);

// 10*log10(1/MSE) over valid pixels, data range [0,1]; identical inputs (and
// anything above it) report the 99 dB cap. Throws EmptyValidRegion.
double psnr(const ImageBuffer& pred, const ImageBuffer& gt,
            const ImageBuffer& valid);

// Gaussian-weighted SSIM, 11x11 window, sigma 1.5, C1=(0.01)^2, C2=(0.03)^2,
// averaged over channels and over windows that lie fully inside the image and
// contain no invalid pixel. Throws EmptyValidRegion when no window survives.
double ssim(const ImageBuffer& pred, const ImageBuffer& gt,
            const ImageBuffer& valid);

struct EvalRecord {
  std::string object_id;
  std::string pair_id;
  double d_azimuth_deg = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double valid_pixel_fraction = 1.0;
};

struct BucketRow {
  std::string name;
  size_t count = 0;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

struct BucketedReport {
  std::vector<BucketRow> rows;  // All, 0-30, 30-60, 60-180

  std::string to_csv() const;   // header: bucket,count,psnr_db,ssim
  std::string to_text() const;  // aligned table
};

BucketedReport bucketed_report(const std::vector<EvalRecord>& records);

void write_records_csv(const std::string& path,
                       const std::vector<EvalRecord>& records);

}  // namespace dcur
