#include "drivecurate/drivecurate.h"

#include <cstring>
#include <string>

#include "core/curation.hpp"
#include "core/errors.hpp"
#include "core/evalmetrics.hpp"
#include "core/geometry.hpp"
#include "core/pipeline.hpp"
#include "core/run_config.hpp"

namespace {

thread_local std::string g_last_error;

dcur_status map_code(dcur::ErrorCode code) {
  using dcur::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument:     return DCUR_ERR_INVALID_ARGUMENT;
    case ErrorCode::ParseError:          return DCUR_ERR_PARSE;
    case ErrorCode::MissingAsset:        return DCUR_ERR_MISSING_ASSET;
    case ErrorCode::InconsistentTrack:   return DCUR_ERR_INCONSISTENT_TRACK;
    case ErrorCode::PoleDegenerate:      return DCUR_ERR_POLE_DEGENERATE;
    case ErrorCode::CoincidentCenters:   return DCUR_ERR_COINCIDENT_CENTERS;
    case ErrorCode::NumericallySingular: return DCUR_ERR_NUMERICALLY_SINGULAR;
    case ErrorCode::SingularHomography:  return DCUR_ERR_SINGULAR_HOMOGRAPHY;
    case ErrorCode::DegenerateBox:       return DCUR_ERR_DEGENERATE_BOX;
    case ErrorCode::EmptyForeground:     return DCUR_ERR_EMPTY_FOREGROUND;
    case ErrorCode::ShapeMismatch:       return DCUR_ERR_SHAPE_MISMATCH;
    case ErrorCode::BatchTooSmall:       return DCUR_ERR_BATCH_TOO_SMALL;
    case ErrorCode::DivergedLoss:        return DCUR_ERR_DIVERGED_LOSS;
    case ErrorCode::EmptyValidRegion:    return DCUR_ERR_EMPTY_VALID_REGION;
    case ErrorCode::IoError:             return DCUR_ERR_IO;
    case ErrorCode::VersionMismatch:     return DCUR_ERR_VERSION_MISMATCH;
    case ErrorCode::NoUsableFrames:      return DCUR_ERR_NO_USABLE_FRAMES;
    case ErrorCode::InvalidConfig:       return DCUR_ERR_INVALID_CONFIG;
    case ErrorCode::Internal:            return DCUR_ERR_INTERNAL;
  }
  return DCUR_ERR_INTERNAL;
}

template <typename Fn>
dcur_status guarded(Fn&& fn) {
  try {
    fn();
    return DCUR_OK;
  } catch (const dcur::Error& e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DCUR_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return DCUR_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

dcur::Mat3 mat3_from(const double m[9]) {
  dcur::Mat3 out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out(r, c) = m[r * 3 + c];
  return out;
}

void mat3_to(const dcur::Mat3& m, double out[9]) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[r * 3 + c] = m(r, c);
}

dcur::CameraModel camera_from(const double k[6]) {
  dcur::CameraModel cam;
  cam.fx = k[0];
  cam.fy = k[1];
  cam.cx = k[2];
  cam.cy = k[3];
  cam.width = static_cast<int>(k[4]);
  cam.height = static_cast<int>(k[5]);
  cam.validate();
  return cam;
}

dcur::ImageBuffer image_from(const float* data, int w, int h, int c) {
  dcur::ImageBuffer img(w, h, c);
  std::memcpy(img.data.data(), data, img.data.size() * sizeof(float));
  return img;
}

dcur::ImageBuffer valid_from(const unsigned char* valid, int w, int h) {
  dcur::ImageBuffer mask(w, h, 1, 1.0f);
  if (valid) {
    for (size_t i = 0; i < mask.data.size(); ++i) {
      mask.data[i] = valid[i] ? 1.0f : 0.0f;
    }
  }
  return mask;
}

dcur_status require(bool ok, const char* what) {
  if (ok) return DCUR_OK;
  g_last_error = what;
  return DCUR_ERR_INVALID_ARGUMENT;
}

}  // namespace

struct dcur_config {
  dcur::RunConfig cfg;
};

struct dcur_manifest {
  dcur::DrivingLogManifest manifest;
};

extern "C" {

const char* dcur_status_name(dcur_status status) {
  switch (status) {
    case DCUR_OK: return "Ok";
    case DCUR_ERR_INVALID_ARGUMENT:     return "InvalidArgument";
    case DCUR_ERR_PARSE:                return "ParseError";
    case DCUR_ERR_MISSING_ASSET:        return "MissingAsset";
    case DCUR_ERR_INCONSISTENT_TRACK:   return "InconsistentTrack";
    case DCUR_ERR_POLE_DEGENERATE:      return "PoleDegenerate";
    case DCUR_ERR_COINCIDENT_CENTERS:   return "CoincidentCenters";
    case DCUR_ERR_NUMERICALLY_SINGULAR: return "NumericallySingular";
    case DCUR_ERR_SINGULAR_HOMOGRAPHY:  return "SingularHomography";
    case DCUR_ERR_DEGENERATE_BOX:       return "DegenerateBox";
    case DCUR_ERR_EMPTY_FOREGROUND:     return "EmptyForeground";
    case DCUR_ERR_SHAPE_MISMATCH:       return "ShapeMismatch";
    case DCUR_ERR_BATCH_TOO_SMALL:      return "BatchTooSmall";
    case DCUR_ERR_DIVERGED_LOSS:        return "DivergedLoss";
    case DCUR_ERR_EMPTY_VALID_REGION:   return "EmptyValidRegion";
    case DCUR_ERR_IO:                   return "IoError";
    case DCUR_ERR_VERSION_MISMATCH:     return "VersionMismatch";
    case DCUR_ERR_NO_USABLE_FRAMES:     return "NoUsableFrames";
    case DCUR_ERR_INVALID_CONFIG:       return "InvalidConfig";
    case DCUR_ERR_INTERNAL:             return "Internal";
  }
  return "Internal";
}

const char* dcur_version_string(void) { return "1.0.0"; }

const char* dcur_last_error(void) { return g_last_error.c_str(); }

void dcur_string_free(char* s) { std::free(s); }

dcur_config* dcur_config_create(void) { return new dcur_config(); }

void dcur_config_destroy(dcur_config* config) { delete config; }

dcur_status dcur_config_load_file(dcur_config* config, const char* path) {
  if (auto rc = require(config && path, "null argument")) return rc;
  return guarded([&] { config->cfg = dcur::RunConfig::load_file(path); });
}

dcur_status dcur_config_set(dcur_config* config, const char* key,
                            const char* value) {
  if (auto rc = require(config && key && value, "null argument")) return rc;
  return guarded([&] { config->cfg.set(key, value); });
}

dcur_status dcur_config_validate(const dcur_config* config) {
  if (auto rc = require(config != nullptr, "null config")) return rc;
  return guarded([&] { config->cfg.validate(); });
}

dcur_status dcur_config_to_json(const dcur_config* config, char** json_out) {
  if (auto rc = require(config && json_out, "null argument")) return rc;
  return guarded([&] { *json_out = dup_string(config->cfg.to_json().dump(2)); });
}

dcur_status dcur_manifest_load(const char* path, dcur_manifest** out) {
  if (auto rc = require(path && out, "null argument")) return rc;
  return guarded([&] {
    auto* m = new dcur_manifest();
    try {
      m->manifest = dcur::load_manifest(path);
    } catch (...) {
      delete m;
      throw;
    }
    *out = m;
  });
}

void dcur_manifest_destroy(dcur_manifest* manifest) { delete manifest; }

int dcur_manifest_object_count(const dcur_manifest* manifest) {
  return manifest ? static_cast<int>(manifest->manifest.objects.size()) : 0;
}

int dcur_manifest_frame_count(const dcur_manifest* manifest) {
  return manifest ? static_cast<int>(manifest->manifest.frames.size()) : 0;
}

dcur_status dcur_run_synth(const dcur_config* config, const char* out_dir) {
  if (auto rc = require(config && out_dir, "null argument")) return rc;
  return guarded([&] { dcur::run_synth(config->cfg, out_dir); });
}

dcur_status dcur_run_curate(const dcur_config* config,
                            const char* manifest_path, const char* out_dir) {
  if (auto rc = require(config && manifest_path && out_dir, "null argument")) {
    return rc;
  }
  return guarded([&] { dcur::run_curate(config->cfg, manifest_path, out_dir); });
}

dcur_status dcur_run_embed(const dcur_config* config, const char* dataset_dir,
                           const char* out_dir) {
  if (auto rc = require(config && dataset_dir && out_dir, "null argument")) {
    return rc;
  }
  return guarded([&] { dcur::run_embed(config->cfg, dataset_dir, out_dir); });
}

dcur_status dcur_run_train_toy(const dcur_config* config,
                               const char* dataset_dir, const char* out_dir) {
  if (auto rc = require(config && dataset_dir && out_dir, "null argument")) {
    return rc;
  }
  return guarded(
      [&] { dcur::run_train_toy(config->cfg, dataset_dir, out_dir); });
}

dcur_status dcur_run_eval(const dcur_config* config, const char* dataset_dir,
                          const char* model_path, const char* out_dir,
                          char** report_out) {
  if (auto rc = require(config && dataset_dir && model_path && out_dir,
                        "null argument")) {
    return rc;
  }
  return guarded([&] {
    const std::string report =
        dcur::run_eval(config->cfg, dataset_dir, model_path, out_dir);
    if (report_out) *report_out = dup_string(report);
  });
}

dcur_status dcur_inspect_sample(const char* dataset_dir, const char* object_id,
                                const char* frame_id, char** json_out) {
  if (auto rc = require(dataset_dir && object_id && frame_id && json_out,
                        "null argument")) {
    return rc;
  }
  return guarded([&] {
    *json_out = dup_string(dcur::inspect_sample(dataset_dir, object_id, frame_id));
  });
}

dcur_status dcur_orbital_from_camera(const double rotation[9],
                                     const double translation[3],
                                     const double box_center[3],
                                     const double box_heading[9],
                                     double* elevation_rad, double* azimuth_rad,
                                     double* distance_m) {
  if (auto rc = require(rotation && translation && box_center && box_heading &&
                            elevation_rad && azimuth_rad && distance_m,
                        "null argument")) {
    return rc;
  }
  return guarded([&] {
    dcur::RigidTransform cam{mat3_from(rotation),
                             dcur::Vec3(translation[0], translation[1],
                                        translation[2])};
    dcur::ObjectBox3D box;
    box.center_world = dcur::Vec3(box_center[0], box_center[1], box_center[2]);
    box.heading_world = mat3_from(box_heading);
    const dcur::OrbitalPose pose = dcur::orbital_from_camera(cam, box);
    *elevation_rad = pose.elevation_rad;
    *azimuth_rad = pose.azimuth_rad;
    *distance_m = pose.distance_m;
  });
}

dcur_status dcur_orbital_to_camera(double elevation_rad, double azimuth_rad,
                                   double distance_m,
                                   const double box_center[3],
                                   const double box_heading[9],
                                   double rotation_out[9],
                                   double translation_out[3]) {
  if (auto rc = require(box_center && box_heading && rotation_out &&
                            translation_out,
                        "null argument")) {
    return rc;
  }
  return guarded([&] {
    dcur::OrbitalPose pose{elevation_rad, azimuth_rad, distance_m};
    dcur::ObjectBox3D box;
    box.center_world = dcur::Vec3(box_center[0], box_center[1], box_center[2]);
    box.heading_world = mat3_from(box_heading);
    const dcur::RigidTransform cam = dcur::orbital_to_camera(pose, box);
    mat3_to(cam.rotation, rotation_out);
    translation_out[0] = cam.translation.x();
    translation_out[1] = cam.translation.y();
    translation_out[2] = cam.translation.z();
  });
}

dcur_status dcur_rotational_homography(const double k_src[6],
                                       const double k_dst[6],
                                       const double rotation[9],
                                       double h_out[9]) {
  if (auto rc = require(k_src && k_dst && rotation && h_out, "null argument")) {
    return rc;
  }
  return guarded([&] {
    const dcur::Mat3 h = dcur::rotational_homography(
        camera_from(k_src), camera_from(k_dst), mat3_from(rotation));
    mat3_to(h, h_out);
  });
}

int dcur_azimuth_bucket(double d_azimuth_rad) {
  return static_cast<int>(dcur::azimuth_bucket(d_azimuth_rad));
}

dcur_status dcur_psnr(const float* pred, const float* gt,
                      const unsigned char* valid, int width, int height,
                      int channels, double* out_db) {
  if (auto rc = require(pred && gt && out_db && width > 0 && height > 0 &&
                            channels > 0,
                        "bad image arguments")) {
    return rc;
  }
  return guarded([&] {
    *out_db = dcur::psnr(image_from(pred, width, height, channels),
                         image_from(gt, width, height, channels),
                         valid_from(valid, width, height));
  });
}

dcur_status dcur_ssim(const float* pred, const float* gt,
                      const unsigned char* valid, int width, int height,
                      int channels, double* out_score) {
  if (auto rc = require(pred && gt && out_score && width > 0 && height > 0 &&
                            channels > 0,
                        "bad image arguments")) {
    return rc;
  }
  return guarded([&] {
    *out_score = dcur::ssim(image_from(pred, width, height, channels),
                            image_from(gt, width, height, channels),
                            valid_from(valid, width, height));
  });
}

}  // extern "C"
