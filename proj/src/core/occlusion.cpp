#include "core/occlusion.hpp"

#include <cmath>

namespace dcur {

double Trimap::unknown_fraction() const {
  if (labels.empty()) return 0.0;
  size_t unknown = 0;
  for (TriLabel l : labels) {
    if (l == TriLabel::Unknown) ++unknown;
  }
  return static_cast<double>(unknown) / static_cast<double>(labels.size());
}

Trimap Trimap::hflip() const {
  Trimap out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out.at(x, y) = at(width - 1 - x, y);
    }
  }
  return out;
}

double LatentMask::zero_fraction() const {
  if (values.empty()) return 0.0;
  size_t zeros = 0;
  for (double v : values) {
    if (v == 0.0) ++zeros;
  }
  return static_cast<double>(zeros) / static_cast<double>(values.size());
}

Trimap trimap_from_semantics(const ImageBuffer& class_map,
                             const ImageBuffer& instance_map,
                             int target_instance,
                             const std::unordered_set<int>& occluder_classes) {
  if (class_map.width != instance_map.width ||
      class_map.height != instance_map.height) {
    raise(ErrorCode::ShapeMismatch,
          "class map and instance map dimensions differ");
  }
  if (class_map.channels != 1 || instance_map.channels != 1) {
    raise(ErrorCode::InvalidArgument, "panoptic maps must be single-channel");
  }

  Trimap trimap(class_map.width, class_map.height);
  bool any_foreground = false;
  for (int y = 0; y < class_map.height; ++y) {
    for (int x = 0; x < class_map.width; ++x) {
      const int instance = static_cast<int>(std::lround(instance_map.at(x, y, 0)));
      if (instance == target_instance) {
        trimap.at(x, y) = TriLabel::Foreground;
        any_foreground = true;
        continue;
      }
      const int cls = static_cast<int>(std::lround(class_map.at(x, y, 0)));
      trimap.at(x, y) = occluder_classes.count(cls) ? TriLabel::Unknown
                                                    : TriLabel::Background;
    }
  }
  if (!any_foreground) {
    raise(ErrorCode::EmptyForeground,
          "no pixel carries target instance " + std::to_string(target_instance));
  }
  return trimap;
}

LatentMask latent_mask(const Trimap& trimap, int factor) {
  if (factor <= 0) raise(ErrorCode::InvalidArgument, "factor must be > 0");
  LatentMask mask;
  mask.h = (trimap.height + factor - 1) / factor;
  mask.w = (trimap.width + factor - 1) / factor;
  mask.values.assign(static_cast<size_t>(mask.h) * mask.w, 1.0);
  for (int y = 0; y < trimap.height; ++y) {
    for (int x = 0; x < trimap.width; ++x) {
      if (trimap.at(x, y) == TriLabel::Unknown) {
        mask.values[static_cast<size_t>(y / factor) * mask.w + x / factor] = 0.0;
      }
    }
  }
  return mask;
}

LatentGrid apply_mask(const LatentGrid& x, const LatentMask& m) {
  if (x.h != m.h || x.w != m.w) {
    raise(ErrorCode::ShapeMismatch, "latent grid and mask dimensions differ");
  }
  LatentGrid out(x.channels, x.h, x.w);
  for (int c = 0; c < x.channels; ++c) {
    for (int y = 0; y < x.h; ++y) {
      for (int xx = 0; xx < x.w; ++xx) {
        const double mv = m.at(y, xx);
        out.at(c, y, xx) = x.at(c, y, xx) * mv + (1.0 - mv);
      }
    }
  }
  return out;
}

ImageBuffer trimap_to_buffer(const Trimap& trimap) {
  ImageBuffer buf(trimap.width, trimap.height, 1);
  for (int y = 0; y < trimap.height; ++y) {
    for (int x = 0; x < trimap.width; ++x) {
      uint8_t b = kTrimapBackgroundByte;
      switch (trimap.at(x, y)) {
        case TriLabel::Foreground: b = kTrimapForegroundByte; break;
        case TriLabel::Unknown:    b = kTrimapUnknownByte; break;
        case TriLabel::Background: b = kTrimapBackgroundByte; break;
      }
      buf.at(x, y, 0) = static_cast<float>(b);
    }
  }
  return buf;
}

Trimap trimap_from_buffer(const ImageBuffer& buffer) {
  if (buffer.channels != 1) {
    raise(ErrorCode::InvalidArgument, "trimap buffer must be single-channel");
  }
  Trimap trimap(buffer.width, buffer.height);
  for (int y = 0; y < buffer.height; ++y) {
    for (int x = 0; x < buffer.width; ++x) {
      const int b = static_cast<int>(std::lround(buffer.at(x, y, 0)));
      if (b == kTrimapForegroundByte) {
        trimap.at(x, y) = TriLabel::Foreground;
      } else if (b == kTrimapUnknownByte) {
        trimap.at(x, y) = TriLabel::Unknown;
      } else if (b == kTrimapBackgroundByte) {
        trimap.at(x, y) = TriLabel::Background;
      } else {
        raise(ErrorCode::ParseError,
              "unexpected trimap byte value " + std::to_string(b));
      }
    }
  }
  return trimap;
}

}  // namespace dcur
