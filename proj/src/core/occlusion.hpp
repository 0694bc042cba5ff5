#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

#include "core/image_buffer.hpp"
#include "core/latent.hpp"

namespace dcur {

enum class TriLabel : uint8_t { Background = 0, Unknown = 1, Foreground = 2 };

// PNG byte encoding of the three labels (white / gray / black).
inline constexpr uint8_t kTrimapForegroundByte = 255;
inline constexpr uint8_t kTrimapUnknownByte = 128;
inline constexpr uint8_t kTrimapBackgroundByte = 0;

struct Trimap {
  int width = 0;
  int height = 0;
  std::vector<TriLabel> labels;

  Trimap() = default;
  Trimap(int w, int h, TriLabel fill = TriLabel::Background)
      : width(w), height(h),
        labels(static_cast<size_t>(w) * h, fill) {}

  TriLabel& at(int x, int y) {
    return labels[static_cast<size_t>(y) * width + x];
  }
  TriLabel at(int x, int y) const {
    return labels[static_cast<size_t>(y) * width + x];
  }

  double unknown_fraction() const;
  Trimap hflip() const;
};

// Binary validity mask on the latent grid; 0 marks cells touched by any
// Unknown pixel, 1 marks cells safe to supervise.
struct LatentMask {
  int h = 0;
  int w = 0;
  std::vector<double> values;  // each exactly 0.0 or 1.0

  double at(int y, int x) const {
    return values[static_cast<size_t>(y) * w + x];
  }
  double zero_fraction() const;
};

// Builds the trimap from panoptic maps: Foreground where the instance map
// carries target_instance, Unknown where the class is a potential occluder
// (and not the target), Background otherwise. Throws EmptyForeground when
// the target instance is absent.
Trimap trimap_from_semantics(const ImageBuffer& class_map,
                             const ImageBuffer& instance_map,
                             int target_instance,
                             const std::unordered_set<int>& occluder_classes);

// Conservative min-pool to the latent grid: a cell is 0 iff any covered
// pixel is Unknown. Trailing partial cells pool over the pixels they cover.
LatentMask latent_mask(const Trimap& trimap, int factor = 8);

// M(x, m) = x*m + (1 - m), mask broadcast across channels.
LatentGrid apply_mask(const LatentGrid& x, const LatentMask& m);

// Trimap <-> categorical 1-channel buffer in the PNG byte convention.
ImageBuffer trimap_to_buffer(const Trimap& trimap);
Trimap trimap_from_buffer(const ImageBuffer& buffer);

}  // namespace dcur
