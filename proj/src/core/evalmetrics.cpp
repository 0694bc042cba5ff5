#include "core/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dcur {

namespace {

constexpr int kWindow = 11;
constexpr int kHalf = kWindow / 2;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_pair(const ImageBuffer& pred, const ImageBuffer& gt,
                const ImageBuffer& valid) {
  if (!pred.same_shape(gt)) {
    raise(ErrorCode::ShapeMismatch, "pred and gt shapes differ");
  }
  if (valid.width != pred.width || valid.height != pred.height ||
      valid.channels != 1) {
    raise(ErrorCode::ShapeMismatch, "valid mask shape mismatch");
  }
}

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kWindow);
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kHalf;
    k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable Gaussian filter; only interior pixels (window fully inside) are
// consumed downstream, so border handling is irrelevant.
void gauss_filter(const std::vector<double>& src, int w, int h,
                  const std::vector<double>& kernel, std::vector<double>& tmp,
                  std::vector<double>& dst) {
  tmp.assign(src.size(), 0.0);
  dst.assign(src.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = kHalf; x < w - kHalf; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) {
        acc += kernel[i] * src[static_cast<size_t>(y) * w + x + i - kHalf];
      }
      tmp[static_cast<size_t>(y) * w + x] = acc;
    }
  }
  for (int y = kHalf; y < h - kHalf; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) {
        acc += kernel[i] * tmp[static_cast<size_t>(y + i - kHalf) * w + x];
      }
      dst[static_cast<size_t>(y) * w + x] = acc;
    }
  }
}

}  // namespace

ImageBuffer valid_from_trimap(const Trimap& trimap) {
  ImageBuffer mask(trimap.width, trimap.height, 1);
  for (int y = 0; y < trimap.height; ++y) {
    for (int x = 0; x < trimap.width; ++x) {
      mask.at(x, y, 0) = trimap.at(x, y) == TriLabel::Unknown ? 0.0f : 1.0f;
    }
  }
  return mask;
}

ImageBuffer all_valid(int width, int height) {
  return ImageBuffer(width, height, 1, 1.0f);
}

double psnr(const ImageBuffer& pred, const ImageBuffer& gt,
            const ImageBuffer& valid) {
  check_pair(pred, gt, valid);
  double sum = 0.0;
  size_t count = 0;
  for (int y = 0; y < pred.height; ++y) {
    for (int x = 0; x < pred.width; ++x) {
      if (valid.at(x, y, 0) == 0.0f) continue;
      for (int c = 0; c < pred.channels; ++c) {
        const double d = static_cast<double>(pred.at(x, y, c)) - gt.at(x, y, c);
        sum += d * d;
        ++count;
      }
    }
  }
  if (count == 0) {
    raise(ErrorCode::EmptyValidRegion, "psnr: no valid pixels");
  }
  const double mse = sum / static_cast<double>(count);
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageBuffer& pred, const ImageBuffer& gt,
            const ImageBuffer& valid) {
  check_pair(pred, gt, valid);
  const int w = pred.width;
  const int h = pred.height;
  if (w < kWindow || h < kWindow) {
    raise(ErrorCode::EmptyValidRegion, "ssim: image smaller than the window");
  }
  const auto kernel = gaussian_kernel();

  // Integral image of invalidity: a window survives iff its sum is zero.
  std::vector<uint32_t> integral(static_cast<size_t>(w + 1) * (h + 1), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const uint32_t inv = valid.at(x, y, 0) == 0.0f ? 1u : 0u;
      integral[static_cast<size_t>(y + 1) * (w + 1) + x + 1] =
          inv + integral[static_cast<size_t>(y) * (w + 1) + x + 1] +
          integral[static_cast<size_t>(y + 1) * (w + 1) + x] -
          integral[static_cast<size_t>(y) * (w + 1) + x];
    }
  }
  auto window_invalid = [&](int cx, int cy) {
    const int x0 = cx - kHalf, y0 = cy - kHalf;
    const int x1 = cx + kHalf + 1, y1 = cy + kHalf + 1;
    return integral[static_cast<size_t>(y1) * (w + 1) + x1] -
               integral[static_cast<size_t>(y0) * (w + 1) + x1] -
               integral[static_cast<size_t>(y1) * (w + 1) + x0] +
               integral[static_cast<size_t>(y0) * (w + 1) + x0] >
           0;
  };

  const size_t plane = static_cast<size_t>(w) * h;
  std::vector<double> a(plane), b(plane), aa(plane), bb(plane), ab(plane);
  std::vector<double> mu_a, mu_b, m_aa, m_bb, m_ab, tmp;

  double total = 0.0;
  size_t windows = 0;
  for (int c = 0; c < pred.channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const size_t i = static_cast<size_t>(y) * w + x;
        a[i] = pred.at(x, y, c);
        b[i] = gt.at(x, y, c);
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
      }
    }
    gauss_filter(a, w, h, kernel, tmp, mu_a);
    gauss_filter(b, w, h, kernel, tmp, mu_b);
    gauss_filter(aa, w, h, kernel, tmp, m_aa);
    gauss_filter(bb, w, h, kernel, tmp, m_bb);
    gauss_filter(ab, w, h, kernel, tmp, m_ab);

    for (int y = kHalf; y < h - kHalf; ++y) {
      for (int x = kHalf; x < w - kHalf; ++x) {
        if (window_invalid(x, y)) continue;
        const size_t i = static_cast<size_t>(y) * w + x;
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = m_aa[i] - ma * ma;
        const double vb = m_bb[i] - mb * mb;
        const double cov = m_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
                 ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
        ++windows;
      }
    }
  }
  if (windows == 0) {
    raise(ErrorCode::EmptyValidRegion, "ssim: no fully valid window");
  }
  return total / static_cast<double>(windows);
}

BucketedReport bucketed_report(const std::vector<EvalRecord>& records) {
  if (records.empty()) {
    raise(ErrorCode::InvalidArgument, "bucketed_report: no records");
  }
  struct Acc {
    size_t count = 0;
    double psnr = 0.0;
    double ssim = 0.0;
  };
  Acc all;
  Acc buckets[3];
  for (const auto& r : records) {
    const auto b = azimuth_bucket(r.d_azimuth_deg * kDegToRad);
    Acc& acc = buckets[static_cast<int>(b)];
    acc.count++;
    acc.psnr += r.psnr_db;
    acc.ssim += r.ssim;
    all.count++;
    all.psnr += r.psnr_db;
    all.ssim += r.ssim;
  }

  BucketedReport report;
  auto push = [&](const std::string& name, const Acc& acc) {
    BucketRow row;
    row.name = name;
    row.count = acc.count;
    if (acc.count > 0) {
      row.mean_psnr = acc.psnr / static_cast<double>(acc.count);
      row.mean_ssim = acc.ssim / static_cast<double>(acc.count);
    }
    report.rows.push_back(row);
  };
  push("All", all);
  push("0-30", buckets[0]);
  push("30-60", buckets[1]);
  push("60-180", buckets[2]);
  return report;
}

std::string BucketedReport::to_csv() const {
  std::ostringstream out;
  out << "bucket,count,psnr_db,ssim\n";
  char buf[160];
  for (const auto& row : rows) {
    if (row.count == 0) {
      std::snprintf(buf, sizeof(buf), "%s,0,,\n", row.name.c_str());
    } else {
      std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%.6f\n", row.name.c_str(),
                    row.count, row.mean_psnr, row.mean_ssim);
    }
    out << buf;
  }
  return out.str();
}

std::string BucketedReport::to_text() const {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-8s %8s %10s %8s\n", "bucket", "count",
                "psnr_db", "ssim");
  out << buf;
  for (const auto& row : rows) {
    if (row.count == 0) {
      std::snprintf(buf, sizeof(buf), "%-8s %8zu %10s %8s\n", row.name.c_str(),
                    row.count, "-", "-");
    } else {
      std::snprintf(buf, sizeof(buf), "%-8s %8zu %10.3f %8.4f\n",
                    row.name.c_str(), row.count, row.mean_psnr, row.mean_ssim);
    }
    out << buf;
  }
  return out.str();
}

void write_records_csv(const std::string& path,
                       const std::vector<EvalRecord>& records) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot open for writing: " + path);
  out << "object_id,pair_id,d_azimuth_deg,psnr_db,ssim,valid_pixel_fraction\n";
  char buf[320];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f,%.6f\n",
                  r.object_id.c_str(), r.pair_id.c_str(), r.d_azimuth_deg,
                  r.psnr_db, r.ssim, r.valid_pixel_fraction);
    out << buf;
  }
  if (!out) raise(ErrorCode::IoError, "write failed: " + path);
}

}  // namespace dcur
