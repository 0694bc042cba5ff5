#include "core/image_buffer.hpp"

namespace dcur {

ImageBuffer hflip(const ImageBuffer& src) {
  ImageBuffer out(src.width, src.height, src.channels);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      for (int c = 0; c < src.channels; ++c) {
        out.at(x, y, c) = src.at(src.width - 1 - x, y, c);
      }
    }
  }
  return out;
}

}  // namespace dcur
