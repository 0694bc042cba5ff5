#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/conditioning.hpp"
#include "core/jsonutil.hpp"

namespace dcur {

enum class CropStrategy { FixedFov, Adaptive };
enum class GuidanceMode { Weak, Strong };

const char* crop_strategy_name(CropStrategy s);
CropStrategy crop_strategy_from_name(const std::string& name);
const char* guidance_mode_name(GuidanceMode m);
GuidanceMode guidance_mode_from_name(const std::string& name);

// Potential occluder classes, as annotated in driving panoptic label sets.
// Datasets with other taxonomies remap names in the manifest label table.
const std::vector<std::string>& default_occluder_class_names();

struct SynthConfig {
  int shapes = 5;
  int azimuth_steps = 24;
  double elevation_deg = 20.0;
  double distance_m = 8.0;
  double second_distance_m = 0.0;  // 0 disables the two-distance orbit pair
  int image_width = 512;
  int image_height = 512;
  double focal_px = 420.0;
  double point_spacing_m = 0.05;
  double camera_jitter_deg = 4.0;
  bool occluder_enabled = false;
  double occluder_radius_m = 1.0;
  double occluder_depth_frac = 0.5;    // along the optical axis, frac of z
  double occluder_offset_x_m = 0.0;    // lateral offset in camera frame
  double occluder_offset_y_m = 0.0;
};

struct TrainConfig {
  int steps = 2000;
  int batch_size = 8;
  double learning_rate = 1e-3;
  int timesteps = 1000;
  double beta_start = 1e-4;
  double beta_end = 2e-2;
  int latent_channels = 4;
  int hidden_channels = 16;
  double latent_scale = 0.125;
  double holdout_fraction = 0.1;
  int max_pairs_per_object = 0;  // 0 = unlimited
  bool use_mask = true;          // occlusion-aware loss on/off
  bool ablate_pose = false;      // zero all pose conditioning inputs
};

struct EvalConfig {
  int ddim_steps = 50;
  int max_pairs = 64;     // 0 = all
  bool use_holdout = true;
  bool save_predictions = true;
};

struct RunConfig {
  uint64_t seed = 1234;
  int jobs = 0;  // 0 = hardware concurrency
  CropStrategy crop_strategy = CropStrategy::FixedFov;
  double fov_deg = 49.1;
  double expand_ratio = 1.2;
  PoseMode pose_mode = PoseMode::Relative;
  GuidanceMode guidance = GuidanceMode::Weak;
  double min_delta_deg = 3.0;
  double max_occlusion = 0.8;
  double cond_distance_scale = 1.0;
  std::vector<std::string> occluder_classes = default_occluder_class_names();
  SynthConfig synth;
  TrainConfig train;
  EvalConfig eval;

  static RunConfig from_json(const Json& j);
  Json to_json() const;
  static RunConfig load_file(const std::string& path);

  // Dotted-key override with a string-encoded value ("train.steps", "500").
  // Unknown keys and malformed values raise InvalidConfig.
  void set(const std::string& key, const std::string& value);

  // Raises InvalidConfig listing every violated field at once.
  void validate() const;

  int effective_jobs() const;
};

}  // namespace dcur
