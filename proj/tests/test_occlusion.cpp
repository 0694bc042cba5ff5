#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/occlusion.hpp"
#include "core/rng.hpp"

using namespace dcur;

namespace {

ImageBuffer labels_like(int w, int h, float fill) {
  return ImageBuffer(w, h, 1, fill);
}

}  // namespace

TEST_CASE("trimap_from_semantics") {
  const std::unordered_set<int> occluders = {2, 3};

  SUBCASE("target plus road only: no Unknown") {
    ImageBuffer cls = labels_like(16, 16, 0.0f);  // road/void
    ImageBuffer inst = labels_like(16, 16, 0.0f);
    for (int y = 4; y < 10; ++y) {
      for (int x = 4; x < 10; ++x) {
        cls.at(x, y, 0) = 1.0f;
        inst.at(x, y, 0) = 7.0f;
      }
    }
    const Trimap t = trimap_from_semantics(cls, inst, 7, occluders);
    CHECK(t.unknown_fraction() == 0.0);
    CHECK(t.at(5, 5) == TriLabel::Foreground);
    CHECK(t.at(0, 0) == TriLabel::Background);
  }
  SUBCASE("pedestrian blob becomes Unknown, target stays Foreground") {
    ImageBuffer cls = labels_like(16, 16, 0.0f);
    ImageBuffer inst = labels_like(16, 16, 0.0f);
    cls.at(2, 2, 0) = 1.0f;
    inst.at(2, 2, 0) = 7.0f;  // target pixel
    cls.at(9, 9, 0) = 2.0f;   // occluder class, different instance
    inst.at(9, 9, 0) = 30.0f;
    const Trimap t = trimap_from_semantics(cls, inst, 7, occluders);
    CHECK(t.at(2, 2) == TriLabel::Foreground);
    CHECK(t.at(9, 9) == TriLabel::Unknown);
    CHECK(t.at(0, 0) == TriLabel::Background);
  }
  SUBCASE("occluder-class pixels carrying the target instance stay Foreground") {
    ImageBuffer cls = labels_like(4, 4, 2.0f);  // everything occluder class
    ImageBuffer inst = labels_like(4, 4, 7.0f); // but it IS the target
    const Trimap t = trimap_from_semantics(cls, inst, 7, occluders);
    for (TriLabel l : t.labels) CHECK(l == TriLabel::Foreground);
  }
  SUBCASE("absent target -> EmptyForeground") {
    ImageBuffer cls = labels_like(8, 8, 0.0f);
    ImageBuffer inst = labels_like(8, 8, 0.0f);
    try {
      trimap_from_semantics(cls, inst, 7, occluders);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyForeground);
    }
  }
  SUBCASE("mismatched maps -> ShapeMismatch") {
    CHECK_THROWS_AS(trimap_from_semantics(labels_like(8, 8, 0.0f),
                                          labels_like(8, 9, 0.0f), 1, occluders),
                    Error);
  }
  SUBCASE("labels partition the image") {
    Rng rng(71);
    ImageBuffer cls(32, 32, 1);
    ImageBuffer inst(32, 32, 1);
    for (int i = 0; i < 32 * 32; ++i) {
      cls.data[i] = float(rng.uniform_int(0, 4));
      inst.data[i] = float(rng.uniform_int(0, 3));
    }
    inst.at(0, 0, 0) = 7.0f;
    const Trimap t = trimap_from_semantics(cls, inst, 7, occluders);
    size_t count = 0;
    for (TriLabel l : t.labels) {
      CHECK((l == TriLabel::Foreground || l == TriLabel::Background ||
             l == TriLabel::Unknown));
      ++count;
    }
    CHECK(count == 32 * 32);
  }
}

TEST_CASE("latent_mask min-pool") {
  SUBCASE("all valid -> all ones") {
    Trimap t(32, 32, TriLabel::Background);
    t.at(0, 0) = TriLabel::Foreground;
    const LatentMask m = latent_mask(t);
    CHECK(m.h == 4);
    CHECK(m.w == 4);
    for (double v : m.values) CHECK(v == 1.0);
  }
  SUBCASE("single Unknown pixel at (10,10) zeroes exactly cell (1,1)") {
    Trimap t(32, 32, TriLabel::Background);
    t.at(10, 10) = TriLabel::Unknown;
    const LatentMask m = latent_mask(t);
    for (int y = 0; y < m.h; ++y) {
      for (int x = 0; x < m.w; ++x) {
        CHECK(m.at(y, x) == ((x == 1 && y == 1) ? 0.0 : 1.0));
      }
    }
  }
  SUBCASE("an Unknown pixel in every block saturates to all-zero") {
    Trimap t(32, 32, TriLabel::Foreground);
    for (int by = 0; by < 4; ++by) {
      for (int bx = 0; bx < 4; ++bx) {
        t.at(bx * 8 + 3, by * 8 + 5) = TriLabel::Unknown;
      }
    }
    const LatentMask m = latent_mask(t);
    for (double v : m.values) CHECK(v == 0.0);
  }
  SUBCASE("non-divisible dims pad up with ceil") {
    Trimap t(20, 13, TriLabel::Background);
    const LatentMask m = latent_mask(t);
    CHECK(m.w == 3);
    CHECK(m.h == 2);
  }
  SUBCASE("monotone: adding Unknown pixels never revives a cell") {
    Rng rng(73);
    Trimap t(32, 32, TriLabel::Background);
    for (int i = 0; i < 20; ++i) {
      t.labels[rng.uniform_int(0, 32 * 32 - 1)] = TriLabel::Unknown;
    }
    const LatentMask before = latent_mask(t);
    for (int i = 0; i < 20; ++i) {
      t.labels[rng.uniform_int(0, 32 * 32 - 1)] = TriLabel::Unknown;
    }
    const LatentMask after = latent_mask(t);
    for (size_t i = 0; i < before.values.size(); ++i) {
      CHECK(after.values[i] <= before.values[i]);
    }
  }
}

TEST_CASE("apply_mask") {
  LatentMask half;
  half.h = half.w = 4;
  half.values.assign(16, 1.0);
  for (int i = 0; i < 8; ++i) half.values[i] = 0.0;

  SUBCASE("all ones is the identity, bit exact") {
    LatentMask ones;
    ones.h = ones.w = 4;
    ones.values.assign(16, 1.0);
    Rng rng(79);
    LatentGrid x(3, 4, 4);
    for (double& v : x.data) v = rng.normal();
    const LatentGrid out = apply_mask(x, ones);
    CHECK(out.data == x.data);
  }
  SUBCASE("all zeros gives all ones output") {
    LatentMask zeros;
    zeros.h = zeros.w = 4;
    zeros.values.assign(16, 0.0);
    LatentGrid x(2, 4, 4, 0.37);
    const LatentGrid out = apply_mask(x, zeros);
    for (double v : out.data) CHECK(v == 1.0);
  }
  SUBCASE("half-masked 0.5 grid") {
    LatentGrid x(1, 4, 4, 0.5);
    const LatentGrid out = apply_mask(x, half);
    for (int y = 0; y < 4; ++y) {
      for (int xx = 0; xx < 4; ++xx) {
        CHECK(out.at(0, y, xx) == (half.at(y, xx) == 1.0 ? 0.5 : 1.0));
      }
    }
  }
  SUBCASE("idempotent on masked cells") {
    Rng rng(83);
    LatentGrid x(4, 4, 4);
    for (double& v : x.data) v = rng.normal();
    const LatentGrid once = apply_mask(x, half);
    const LatentGrid twice = apply_mask(once, half);
    CHECK(twice.data == once.data);
  }
  SUBCASE("shape mismatch") {
    LatentGrid x(1, 3, 3, 0.0);
    CHECK_THROWS_AS(apply_mask(x, half), Error);
  }
}

TEST_CASE("trimap buffer round trip uses the PNG byte convention") {
  Trimap t(8, 4, TriLabel::Background);
  t.at(1, 1) = TriLabel::Foreground;
  t.at(2, 2) = TriLabel::Unknown;
  const ImageBuffer buf = trimap_to_buffer(t);
  CHECK(buf.at(1, 1, 0) == 255.0f);
  CHECK(buf.at(2, 2, 0) == 128.0f);
  CHECK(buf.at(0, 0, 0) == 0.0f);
  const Trimap back = trimap_from_buffer(buf);
  CHECK(back.labels == t.labels);
}
