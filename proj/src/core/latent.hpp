#pragma once

#include <vector>

#include "core/errors.hpp"

namespace dcur {

// C x h x w grid at x8 downsampling from the image crop; the space the
// masking operator and the toy denoiser work in.
struct LatentGrid {
  int channels = 0;
  int h = 0;
  int w = 0;
  std::vector<double> data;  // channel-major: data[(c*h + y)*w + x]

  LatentGrid() = default;
  LatentGrid(int c, int h_, int w_, double fill = 0.0)
      : channels(c), h(h_), w(w_),
        data(static_cast<size_t>(c) * h_ * w_, fill) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * h + y) * w + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * h + y) * w + x];
  }

  bool same_shape(const LatentGrid& o) const {
    return channels == o.channels && h == o.h && w == o.w;
  }
  size_t size() const { return data.size(); }
};

}  // namespace dcur
