#include "core/run_config.hpp"

#include <cmath>
#include <thread>

namespace dcur {

const char* crop_strategy_name(CropStrategy s) {
  return s == CropStrategy::FixedFov ? "fixed_fov" : "adaptive";
}

CropStrategy crop_strategy_from_name(const std::string& name) {
  if (name == "fixed_fov") return CropStrategy::FixedFov;
  if (name == "adaptive") return CropStrategy::Adaptive;
  raise(ErrorCode::InvalidConfig, "unknown crop strategy: " + name);
}

const char* guidance_mode_name(GuidanceMode m) {
  return m == GuidanceMode::Weak ? "weak" : "strong";
}

GuidanceMode guidance_mode_from_name(const std::string& name) {
  if (name == "weak") return GuidanceMode::Weak;
  if (name == "strong") return GuidanceMode::Strong;
  raise(ErrorCode::InvalidConfig, "unknown guidance mode: " + name);
}

const std::vector<std::string>& default_occluder_class_names() {
  static const std::vector<std::string> names = {
      "car",         "truck",      "bus",
      "other large vehicle",       "bicycle",
      "motorcycle",  "trailer",    "pedestrian",
      "cyclist",     "motorcyclist",
      "bird",        "ground animal",
      "construction cone pole",    "pole",
      "pedestrian object",         "sign",
      "traffic light",             "vegetation"};
  return names;
}

namespace {

template <typename T>
void maybe_get(const Json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const Json::exception&) {
      raise(ErrorCode::InvalidConfig,
            std::string("config field '") + key + "' has wrong type");
    }
  }
}

}  // namespace

RunConfig RunConfig::from_json(const Json& j) {
  RunConfig c;
  if (j.contains("format_version")) check_format_version(j, "config");
  maybe_get(j, "seed", c.seed);
  maybe_get(j, "jobs", c.jobs);
  if (j.contains("crop")) {
    const Json& crop = j.at("crop");
    std::string strategy = crop_strategy_name(c.crop_strategy);
    maybe_get(crop, "strategy", strategy);
    c.crop_strategy = crop_strategy_from_name(strategy);
    maybe_get(crop, "fov_deg", c.fov_deg);
    maybe_get(crop, "expand_ratio", c.expand_ratio);
  }
  if (j.contains("pose_mode")) {
    c.pose_mode = pose_mode_from_name(j.at("pose_mode").get<std::string>());
  }
  if (j.contains("guidance")) {
    c.guidance = guidance_mode_from_name(j.at("guidance").get<std::string>());
  }
  maybe_get(j, "min_delta_deg", c.min_delta_deg);
  maybe_get(j, "max_occlusion", c.max_occlusion);
  maybe_get(j, "cond_distance_scale", c.cond_distance_scale);
  maybe_get(j, "occluder_classes", c.occluder_classes);
  if (j.contains("synth")) {
    const Json& s = j.at("synth");
    maybe_get(s, "shapes", c.synth.shapes);
    maybe_get(s, "azimuth_steps", c.synth.azimuth_steps);
    maybe_get(s, "elevation_deg", c.synth.elevation_deg);
    maybe_get(s, "distance_m", c.synth.distance_m);
    maybe_get(s, "second_distance_m", c.synth.second_distance_m);
    maybe_get(s, "image_width", c.synth.image_width);
    maybe_get(s, "image_height", c.synth.image_height);
    maybe_get(s, "focal_px", c.synth.focal_px);
    maybe_get(s, "point_spacing_m", c.synth.point_spacing_m);
    maybe_get(s, "camera_jitter_deg", c.synth.camera_jitter_deg);
    maybe_get(s, "occluder_enabled", c.synth.occluder_enabled);
    maybe_get(s, "occluder_radius_m", c.synth.occluder_radius_m);
    maybe_get(s, "occluder_depth_frac", c.synth.occluder_depth_frac);
    maybe_get(s, "occluder_offset_x_m", c.synth.occluder_offset_x_m);
    maybe_get(s, "occluder_offset_y_m", c.synth.occluder_offset_y_m);
  }
  if (j.contains("train")) {
    const Json& t = j.at("train");
    maybe_get(t, "steps", c.train.steps);
    maybe_get(t, "batch_size", c.train.batch_size);
    maybe_get(t, "learning_rate", c.train.learning_rate);
    maybe_get(t, "timesteps", c.train.timesteps);
    maybe_get(t, "beta_start", c.train.beta_start);
    maybe_get(t, "beta_end", c.train.beta_end);
    maybe_get(t, "latent_channels", c.train.latent_channels);
    maybe_get(t, "hidden_channels", c.train.hidden_channels);
    maybe_get(t, "latent_scale", c.train.latent_scale);
    maybe_get(t, "holdout_fraction", c.train.holdout_fraction);
    maybe_get(t, "max_pairs_per_object", c.train.max_pairs_per_object);
    maybe_get(t, "use_mask", c.train.use_mask);
    maybe_get(t, "ablate_pose", c.train.ablate_pose);
  }
  if (j.contains("eval")) {
    const Json& e = j.at("eval");
    maybe_get(e, "ddim_steps", c.eval.ddim_steps);
    maybe_get(e, "max_pairs", c.eval.max_pairs);
    maybe_get(e, "use_holdout", c.eval.use_holdout);
    maybe_get(e, "save_predictions", c.eval.save_predictions);
  }
  return c;
}

Json RunConfig::to_json() const {
  Json j;
  j["format_version"] = kFormatVersion;
  j["seed"] = seed;
  j["jobs"] = jobs;
  j["crop"] = {{"strategy", crop_strategy_name(crop_strategy)},
               {"fov_deg", fov_deg},
               {"expand_ratio", expand_ratio}};
  j["pose_mode"] = pose_mode_name(pose_mode);
  j["guidance"] = guidance_mode_name(guidance);
  j["min_delta_deg"] = min_delta_deg;
  j["max_occlusion"] = max_occlusion;
  j["cond_distance_scale"] = cond_distance_scale;
  j["occluder_classes"] = occluder_classes;
  j["synth"] = {{"shapes", synth.shapes},
                {"azimuth_steps", synth.azimuth_steps},
                {"elevation_deg", synth.elevation_deg},
                {"distance_m", synth.distance_m},
                {"second_distance_m", synth.second_distance_m},
                {"image_width", synth.image_width},
                {"image_height", synth.image_height},
                {"focal_px", synth.focal_px},
                {"point_spacing_m", synth.point_spacing_m},
                {"camera_jitter_deg", synth.camera_jitter_deg},
                {"occluder_enabled", synth.occluder_enabled},
                {"occluder_radius_m", synth.occluder_radius_m},
                {"occluder_depth_frac", synth.occluder_depth_frac},
                {"occluder_offset_x_m", synth.occluder_offset_x_m},
                {"occluder_offset_y_m", synth.occluder_offset_y_m}};
  j["train"] = {{"steps", train.steps},
                {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"timesteps", train.timesteps},
                {"beta_start", train.beta_start},
                {"beta_end", train.beta_end},
                {"latent_channels", train.latent_channels},
                {"hidden_channels", train.hidden_channels},
                {"latent_scale", train.latent_scale},
                {"holdout_fraction", train.holdout_fraction},
                {"max_pairs_per_object", train.max_pairs_per_object},
                {"use_mask", train.use_mask},
                {"ablate_pose", train.ablate_pose}};
  j["eval"] = {{"ddim_steps", eval.ddim_steps},
               {"max_pairs", eval.max_pairs},
               {"use_holdout", eval.use_holdout},
               {"save_predictions", eval.save_predictions}};
  return j;
}

RunConfig RunConfig::load_file(const std::string& path) {
  return from_json(parse_json_file(path));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  Json patch = Json::object();
  Json* node = &patch;
  size_t start = 0;
  for (size_t dot = key.find('.'); dot != std::string::npos;
       dot = key.find('.', start)) {
    node = &((*node)[key.substr(start, dot - start)] = Json::object());
    start = dot + 1;
  }
  const std::string leaf = key.substr(start);
  Json parsed = Json::parse(value, nullptr, false);
  (*node)[leaf] = parsed.is_discarded() ? Json(value) : parsed;

  Json merged = to_json();
  merged.merge_patch(patch);
  // Round-trip through from_json so unknown keys surface as no-ops caught by
  // the comparison below.
  const RunConfig updated = from_json(merged);
  if (updated.to_json() == to_json()) {
    raise(ErrorCode::InvalidConfig, "unknown or ineffective config key: " + key);
  }
  *this = updated;
}

void RunConfig::validate() const {
  std::vector<std::string> bad;
  if (jobs < 0) bad.push_back("jobs must be >= 0");
  if (!(fov_deg > 10.0 && fov_deg < 120.0)) {
    bad.push_back("crop.fov_deg must be in (10, 120)");
  }
  if (!(expand_ratio >= 1.0)) bad.push_back("crop.expand_ratio must be >= 1");
  if (!(min_delta_deg > 0.0 && min_delta_deg <= 180.0)) {
    bad.push_back("min_delta_deg must be in (0, 180]");
  }
  if (!(max_occlusion >= 0.0 && max_occlusion <= 1.0)) {
    bad.push_back("max_occlusion must be in [0, 1]");
  }
  if (!(cond_distance_scale > 0.0)) {
    bad.push_back("cond_distance_scale must be > 0");
  }
  if (synth.shapes < 1) bad.push_back("synth.shapes must be >= 1");
  if (synth.azimuth_steps < 1) bad.push_back("synth.azimuth_steps must be >= 1");
  if (!(std::abs(synth.elevation_deg) < 89.0)) {
    bad.push_back("synth.elevation_deg must be in (-89, 89)");
  }
  if (!(synth.distance_m > 0.0)) bad.push_back("synth.distance_m must be > 0");
  if (synth.image_width < 64 || synth.image_height < 64) {
    bad.push_back("synth.image dims must be >= 64");
  }
  if (!(synth.focal_px > 0.0)) bad.push_back("synth.focal_px must be > 0");
  if (!(synth.point_spacing_m > 0.0)) {
    bad.push_back("synth.point_spacing_m must be > 0");
  }
  if (train.steps < 0) bad.push_back("train.steps must be >= 0");
  if (train.batch_size < 1) bad.push_back("train.batch_size must be >= 1");
  if (guidance == GuidanceMode::Strong && train.batch_size < 2) {
    bad.push_back("train.batch_size must be >= 2 under strong guidance");
  }
  if (!(train.learning_rate >= 0.0)) {
    bad.push_back("train.learning_rate must be >= 0");
  }
  if (train.timesteps < 1) bad.push_back("train.timesteps must be >= 1");
  if (!(train.beta_start > 0.0 && train.beta_start <= train.beta_end &&
        train.beta_end < 1.0)) {
    bad.push_back("train.beta range must satisfy 0 < beta_start <= beta_end < 1");
  }
  if (train.latent_channels < 1 || train.latent_channels > 16) {
    bad.push_back("train.latent_channels must be in [1, 16]");
  }
  if (train.hidden_channels < 1 || train.hidden_channels > 128) {
    bad.push_back("train.hidden_channels must be in [1, 128]");
  }
  if (!(train.latent_scale > 0.0)) bad.push_back("train.latent_scale must be > 0");
  if (!(train.holdout_fraction >= 0.0 && train.holdout_fraction < 1.0)) {
    bad.push_back("train.holdout_fraction must be in [0, 1)");
  }
  if (train.max_pairs_per_object < 0) {
    bad.push_back("train.max_pairs_per_object must be >= 0");
  }
  if (eval.ddim_steps < 0 || eval.ddim_steps > train.timesteps) {
    bad.push_back("eval.ddim_steps must be in [0, train.timesteps]");
  }
  if (eval.max_pairs < 0) bad.push_back("eval.max_pairs must be >= 0");
  if (!bad.empty()) {
    std::string msg = "invalid config:";
    for (const auto& b : bad) msg += " [" + b + "]";
    raise(ErrorCode::InvalidConfig, msg);
  }
}

int RunConfig::effective_jobs() const {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace dcur
