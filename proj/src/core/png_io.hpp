#pragma once

#include <string>

#include "core/image_buffer.hpp"

namespace dcur {

// 8-bit PNG codecs. RGB buffers scale linearly between [0,1] floats and
// bytes; label buffers store raw byte values (categorical, no scaling).
void write_png_rgb(const std::string& path, const ImageBuffer& img);
ImageBuffer read_png_rgb(const std::string& path);

void write_png_label(const std::string& path, const ImageBuffer& labels);
ImageBuffer read_png_label(const std::string& path);

}  // namespace dcur
