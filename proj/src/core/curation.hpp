#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/conditioning.hpp"
#include "core/geometry.hpp"
#include "core/image_buffer.hpp"
#include "core/log.hpp"
#include "core/occlusion.hpp"
#include "core/run_config.hpp"

namespace dcur {

struct ManifestCamera {
  std::string id;
  CameraModel model;
};

struct ManifestFrame {
  std::string id;
  std::string camera_id;
  double timestamp = 0.0;
  std::string image_path;     // relative to the manifest directory
  std::string semantic_path;  // per-pixel class ids, 8-bit PNG
  std::string instance_path;  // per-pixel instance ids, 8-bit PNG
  RigidTransform world_to_camera;
};

struct TrackEntry {
  std::string frame_id;
  ObjectBox3D box;
  std::optional<std::array<double, 4>> bbox2d;  // x, y, w, h in source pixels
  std::optional<OrbitalPose> gt_orbital;        // synthetic ground truth
};

struct ManifestObject {
  std::string id;
  std::string class_name;
  int instance_id = 0;
  std::vector<TrackEntry> track;
};

struct LabelClass {
  int id = 0;
  std::string name;
};

struct DrivingLogManifest {
  std::vector<ManifestCamera> cameras;
  std::vector<ManifestFrame> frames;
  std::vector<ManifestObject> objects;
  std::vector<LabelClass> label_classes;
  std::string base_dir;

  const ManifestCamera& camera(const std::string& id) const;
  const ManifestFrame& frame(const std::string& id) const;
  const ManifestObject& object(const std::string& id) const;

  // Class ids for the named occluder classes; names absent from the label
  // table are ignored (datasets carry differing taxonomies).
  std::unordered_set<int> occluder_ids(
      const std::vector<std::string>& class_names) const;
};

// Parses and fully validates a manifest: JSON shape (ParseError), referential
// integrity and extrinsics orthonormality (InconsistentTrack), and existence
// of every referenced image file (MissingAsset, listing all missing paths).
DrivingLogManifest load_manifest(const std::string& path);
DrivingLogManifest manifest_from_json(const Json& j, const std::string& base_dir,
                                      bool check_assets = true);
Json manifest_to_json(const DrivingLogManifest& m);

// One canonicalized, pose-annotated, occlusion-annotated training view.
struct CuratedSample {
  std::string object_id;
  std::string frame_id;
  ImageBuffer crop;  // 256x256 RGB, quantized to 8-bit levels
  Trimap trimap;
  OrbitalPose orbital;
  CameraModel crop_intrinsics;
  bool flipped = false;
  double scale_factor = 1.0;
};

using SamplePtr = std::shared_ptr<const CuratedSample>;

struct TrainingPair {
  std::string pair_id;
  SamplePtr source;
  SamplePtr target;
  GlobalPoseCondition condition;
  PluckerMap rays;        // latent resolution, target rays in source frame
  LatentMask target_mask;
};

// Greedy in-time-order selection: keep the first frame, then keep a frame iff
// its azimuth differs from the last kept one by at least min_delta (wrapped).
std::vector<size_t> sample_views(const std::vector<OrbitalPose>& track,
                                 double min_delta_deg);

// Full canonicalization of one object: recover orbital poses, select views on
// the azimuth rule, virtually rotate + warp + crop, attach trimaps. Degenerate
// or over-occluded frames are skipped and logged. Throws NoUsableFrames when
// nothing survives.
std::vector<CuratedSample> curate_object(const DrivingLogManifest& manifest,
                                         const std::string& object_id,
                                         const RunConfig& config,
                                         RunLog* log = nullptr);

// All objects, parallel over objects, results in manifest object order.
std::vector<CuratedSample> curate_all(const DrivingLogManifest& manifest,
                                      const RunConfig& config,
                                      RunLog* log = nullptr);

// Horizontally flipped sample with azimuth negated; a bit-exact involution.
CuratedSample symmetric_counterpart(const CuratedSample& s);

// Condition + latent-resolution ray map for a source/target pose pair.
struct PairPayload {
  GlobalPoseCondition condition;
  PluckerMap rays;
};
PairPayload make_pair_payload(const OrbitalPose& src_pose,
                              const OrbitalPose& trg_pose,
                              const CameraModel& target_intrinsics,
                              PoseMode mode, double distance_scale,
                              int latent_size = 32);

// All ordered same-object pairs, optionally capped per object by seeded
// subsampling (cap comes from config.train.max_pairs_per_object).
std::vector<TrainingPair> make_pairs(const std::vector<SamplePtr>& samples,
                                     const RunConfig& config);

struct BatchSlot {
  int pair_index = 0;
  bool source_flipped = false;
};

struct Batch {
  std::vector<BatchSlot> slots;
  bool has_untwinned = false;  // strong guidance with an odd batch size
};

// Weak guidance: each pair independently source-flipped with probability 0.5.
// Strong guidance: each selected pair occupies two adjacent slots, itself and
// its source-flipped twin; odd batch sizes carry one untwinned pair, flagged.
std::vector<Batch> compose_batches(const std::vector<TrainingPair>& pairs,
                                   GuidanceMode mode, int batch_size,
                                   uint64_t rng_seed);

struct DatasetReadResult {
  std::vector<SamplePtr> samples;
  std::vector<TrainingPair> pairs;
  std::vector<std::string> incomplete_objects;
  size_t skipped_pairs = 0;
  uint64_t seed = 0;
  Json config_echo;
};

// Layout: out_dir/objects/<object_id>/<frame_id>.{png,trimap.png,pose.json}
// plus per-object index.json, out_dir/pairs.jsonl and out_dir/dataset.json.
// Per-object indexes and the top-level index are written last so an
// interrupted run is detected as an incomplete object on read.
void write_dataset(const std::vector<SamplePtr>& samples,
                   const std::vector<TrainingPair>& pairs,
                   const std::string& out_dir, uint64_t seed,
                   const Json& config_echo);

DatasetReadResult read_dataset(const std::string& dir);

}  // namespace dcur
