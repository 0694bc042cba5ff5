#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>
#include <filesystem>
#include <set>

#include "core/imaging.hpp"
#include "core/png_io.hpp"
#include "core/rng.hpp"
#include "support/oracles.hpp"

using namespace dcur;

namespace {

ImageBuffer random_rgb(int w, int h, Rng& rng) {
  ImageBuffer img(w, h, 3);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

// Smooth test card so bilinear round trips stay close to the original.
ImageBuffer gradient_card(int w, int h) {
  ImageBuffer img(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = float(x) / (w - 1);
      img.at(x, y, 1) = float(y) / (h - 1);
      img.at(x, y, 2) = 0.5f + 0.4f * std::sin(x * 0.03f) * std::cos(y * 0.02f);
    }
  }
  return img;
}

double interior_psnr(const ImageBuffer& a, const ImageBuffer& b, int margin) {
  double sum = 0.0;
  size_t n = 0;
  for (int y = margin; y < a.height - margin; ++y) {
    for (int x = margin; x < a.width - margin; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double d = double(a.at(x, y, c)) - double(b.at(x, y, c));
        sum += d * d;
        ++n;
      }
    }
  }
  const double mse = sum / double(n);
  return mse == 0.0 ? 99.0 : 10.0 * std::log10(1.0 / mse);
}

CameraModel simple_camera(int w, int h, double f) {
  CameraModel k;
  k.fx = k.fy = f;
  k.cx = w / 2.0;
  k.cy = h / 2.0;
  k.width = w;
  k.height = h;
  return k;
}

}  // namespace

TEST_CASE("warp with identity homography is the identity") {
  Rng rng(3);
  const ImageBuffer img = random_rgb(64, 48, rng);
  const ImageBuffer out = warp_image(img, Mat3::Identity(), 64, 48);
  CHECK(out.data == img.data);
}

TEST_CASE("warp by 180-degree principal-axis rotation mirrors the grid") {
  const CameraModel k = simple_camera(64, 64, 100.0);
  const Mat3 rot = Eigen::AngleAxisd(kPi, Vec3::UnitZ()).toRotationMatrix();
  const Mat3 h = rotational_homography(k, k, rot);
  Rng rng(5);
  const ImageBuffer img = random_rgb(64, 64, rng);
  const ImageBuffer out = warp_image(img, h, 64, 64);
  // pixel (x, y) pulls from (2*cx - x, 2*cy - y)
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const int sx = int(std::lround(2 * k.cx - x));
      const int sy = int(std::lround(2 * k.cy - y));
      if (sx < 0 || sx > 63 || sy < 0 || sy > 63) continue;
      for (int c = 0; c < 3; ++c) {
        CHECK(out.at(x, y, c) == doctest::Approx(img.at(sx, sy, c)).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("warp round trip H then H^-1 keeps interior PSNR >= 30 dB") {
  const CameraModel k = simple_camera(128, 128, 160.0);
  Rng rng(7);
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  const Mat3 rot =
      Eigen::AngleAxisd(0.15, axis.normalized()).toRotationMatrix();
  const Mat3 h = rotational_homography(k, k, rot);
  const Mat3 h_inv = rotational_homography(k, k, rot.transpose());

  const ImageBuffer img = gradient_card(128, 128);
  const ImageBuffer once = warp_image(img, h, 128, 128);
  const ImageBuffer back = warp_image(once, h_inv, 128, 128);
  CHECK(interior_psnr(img, back, 24) >= 30.0);
}

TEST_CASE("warp composition matches the composed homography") {
  const CameraModel k = simple_camera(128, 128, 200.0);
  Rng rng(11);
  Vec3 ax1(rng.normal(), rng.normal(), rng.normal());
  Vec3 ax2(rng.normal(), rng.normal(), rng.normal());
  const Mat3 r1 = Eigen::AngleAxisd(0.08, ax1.normalized()).toRotationMatrix();
  const Mat3 r2 = Eigen::AngleAxisd(-0.1, ax2.normalized()).toRotationMatrix();
  const Mat3 h1 = rotational_homography(k, k, r1);
  const Mat3 h2 = rotational_homography(k, k, r2);

  const ImageBuffer img = gradient_card(128, 128);
  const ImageBuffer two_step = warp_image(warp_image(img, h1, 128, 128), h2, 128, 128);
  const ImageBuffer one_step = warp_image(img, Mat3(h2 * h1), 128, 128);
  CHECK(interior_psnr(two_step, one_step, 24) >= 30.0);
}

TEST_CASE("mask warping uses nearest neighbor and preserves the value set") {
  ImageBuffer mask(40, 40, 1);
  Rng rng(13);
  const float values[3] = {0.0f, 128.0f, 255.0f};
  for (float& v : mask.data) v = values[rng.uniform_int(0, 2)];

  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  const CameraModel k = simple_camera(40, 40, 60.0);
  const Mat3 h = rotational_homography(
      k, k, Eigen::AngleAxisd(0.2, axis.normalized()).toRotationMatrix());
  const ImageBuffer out = warp_image(mask, h, 40, 40, {64.0f, 64.0f, 64.0f});
  std::set<float> seen(out.data.begin(), out.data.end());
  for (float v : seen) {
    CHECK((v == 0.0f || v == 128.0f || v == 255.0f || v == 64.0f));
  }
}

TEST_CASE("singular homography is rejected") {
  Mat3 h = Mat3::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;  // rank 2
  ImageBuffer img(8, 8, 3, 0.5f);
  try {
    warp_image(img, h, 8, 8);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularHomography);
  }
}

TEST_CASE("crop_fixed_fov") {
  SUBCASE("focal arithmetic: 53.13 deg -> 256 px") {
    const CameraModel k = simple_camera(512, 512, 420.0);
    ImageBuffer img(512, 512, 3, 0.25f);
    const CropResult crop = crop_fixed_fov(img, k, 53.130102354155978);
    CHECK(crop.intrinsics.fx == doctest::Approx(256.0).epsilon(1e-9));
    CHECK(crop.intrinsics.cx == doctest::Approx(128.0));
    CHECK(crop.image.width == 256);
    CHECK(crop.image.height == 256);
    CHECK(crop.scale_factor == doctest::Approx(256.0 / 420.0));
  }
  SUBCASE("fov equal to the source camera FOV is a pure resample") {
    // source: 256 wide, f chosen so fov = 2*atan(128/f); ask for that fov
    const CameraModel k = simple_camera(256, 256, 256.0);
    const double fov = 2.0 * std::atan2(128.0, 256.0) * kRadToDeg;
    ImageBuffer img = gradient_card(256, 256);
    const CropResult crop = crop_fixed_fov(img, k, fov);
    CHECK(crop.intrinsics.fx == doctest::Approx(256.0).epsilon(1e-12));
    CHECK(crop.scale_factor == doctest::Approx(1.0));
    CHECK(interior_psnr(img, crop.image, 2) >= 40.0);
  }
  SUBCASE("fov out of range") {
    const CameraModel k = simple_camera(64, 64, 100.0);
    ImageBuffer img(64, 64, 3, 0.0f);
    CHECK_THROWS_AS(crop_fixed_fov(img, k, 5.0), Error);
    CHECK_THROWS_AS(crop_fixed_fov(img, k, 150.0), Error);
  }
}

TEST_CASE("crop_adaptive") {
  const CameraModel k = simple_camera(512, 512, 400.0);
  SUBCASE("bbox arithmetic from the stated rule") {
    ImageBuffer img(512, 512, 3, 0.5f);
    const CropResult crop = crop_adaptive(img, k, {100, 100, 50, 50}, 1.2);
    // side 60 centered at (125,125): region [95,155]^2, scale 256/60
    CHECK(crop.scale_factor == doctest::Approx(256.0 / 60.0));
    CHECK(crop.intrinsics.fx == doctest::Approx(400.0 * 256.0 / 60.0));
    CHECK(crop.intrinsics.cx == doctest::Approx((256.0 - 95.0) * 256.0 / 60.0));
    CHECK(crop.image.width == 256);
  }
  SUBCASE("ratio 1 with a square bbox crops exactly the box") {
    ImageBuffer img = gradient_card(512, 512);
    const CropResult crop = crop_adaptive(img, k, {100, 100, 64, 64}, 1.0);
    CHECK(crop.scale_factor == doctest::Approx(4.0));
    // corner pixel (0,0) of the crop pulls from (100,100)
    CHECK(crop.image.at(0, 0, 0) ==
          doctest::Approx(img.at(100, 100, 0)).epsilon(1e-4));
  }
  SUBCASE("degenerate box") {
    ImageBuffer img(512, 512, 3, 0.0f);
    try {
      crop_adaptive(img, k, {10, 10, 1.0, 1.5}, 1.2);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateBox);
    }
  }
  SUBCASE("box at the image border pads with fill instead of shifting") {
    ImageBuffer img(512, 512, 3, 0.25f);
    const CropResult crop = crop_adaptive(img, k, {-20, -20, 60, 60}, 1.2);
    // top-left of the crop falls outside the source: white fill
    CHECK(crop.image.at(0, 0, 0) == 1.0f);
    CHECK(crop.image.at(0, 0, 1) == 1.0f);
  }
}

TEST_CASE("hflip") {
  SUBCASE("involution, bit exact") {
    Rng rng(21);
    const ImageBuffer img = random_rgb(33, 17, rng);
    CHECK(hflip(hflip(img)).data == img.data);
  }
  SUBCASE("single bright pixel moves to the mirrored column") {
    ImageBuffer img(256, 8, 3, 0.0f);
    img.at(10, 3, 0) = 1.0f;
    const ImageBuffer out = hflip(img);
    CHECK(out.at(245, 3, 0) == 1.0f);
    CHECK(out.at(10, 3, 0) == 0.0f);
  }
  SUBCASE("asymmetric card matches the per-pixel index oracle") {
    Rng rng(22);
    const ImageBuffer img = random_rgb(31, 9, rng);
    const ImageBuffer out = hflip(img);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        for (int c = 0; c < 3; ++c) {
          CHECK(out.at(x, y, c) == img.at(img.width - 1 - x, y, c));
        }
      }
    }
  }
}

TEST_CASE("png round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dcur_png_test";
  fs::create_directories(dir);

  SUBCASE("rgb 8-bit values survive exactly") {
    ImageBuffer img(17, 13, 3);
    Rng rng(31);
    for (float& v : img.data) {
      v = float(rng.uniform_int(0, 255)) / 255.0f;  // byte-exact levels
    }
    const std::string path = (dir / "rgb.png").string();
    write_png_rgb(path, img);
    const ImageBuffer back = read_png_rgb(path);
    REQUIRE(back.width == img.width);
    CHECK(back.data == img.data);
  }
  SUBCASE("label values stored raw") {
    ImageBuffer labels(9, 7, 1);
    Rng rng(32);
    for (float& v : labels.data) v = float(rng.uniform_int(0, 255));
    const std::string path = (dir / "labels.png").string();
    write_png_label(path, labels);
    const ImageBuffer back = read_png_label(path);
    CHECK(back.data == labels.data);
  }
  SUBCASE("missing file raises IoError") {
    try {
      read_png_rgb((dir / "nope.png").string());
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::IoError);
    }
  }
  fs::remove_all(dir);
}
