#pragma once

#include <cstdint>
#include <vector>

#include "core/errors.hpp"

namespace dcur {

// Row-major interleaved pixel buffer. 3 channels = RGB with samples in
// [0, 1]; 1 channel = categorical map (label values stored as-is).
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  float& at(int x, int y, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const ImageBuffer& other) const {
    return width == other.width && height == other.height &&
           channels == other.channels;
  }
};

// Column-mirrored copy; an involution.
ImageBuffer hflip(const ImageBuffer& src);

}  // namespace dcur
