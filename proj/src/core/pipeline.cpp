#include "core/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

#include "core/curation.hpp"
#include "core/evalmetrics.hpp"
#include "core/parallel.hpp"
#include "core/png_io.hpp"
#include "core/synthfix.hpp"
#include "core/toydiff.hpp"

namespace fs = std::filesystem;

namespace dcur {

namespace {

std::unique_ptr<RunLog> make_log(const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  return std::make_unique<RunLog>((fs::path(out_dir) / "run_log.jsonl").string(),
                                  log_level_from_env());
}

std::vector<TrainingPair> select_indices(const std::vector<TrainingPair>& pairs,
                                         const std::vector<size_t>& idx) {
  std::vector<TrainingPair> out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(pairs[i]);
  return out;
}

void clamp01(ImageBuffer& img) {
  for (float& v : img.data) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
}

}  // namespace

std::string sanitize_pair_id(const std::string& pair_id) {
  std::string out;
  out.reserve(pair_id.size());
  for (char c : pair_id) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
        c == '.') {
      out.push_back(c);
    } else {
      out.push_back('_');
    }
  }
  return out;
}

void run_synth(const RunConfig& config, const std::string& out_dir) {
  config.validate();
  const auto log_holder = make_log(out_dir);
  RunLog& log = *log_holder;
  const DrivingLogManifest m = make_toy_dataset(config, out_dir);
  log.info("synth_done", Json{{"objects", m.objects.size()},
                              {"frames", m.frames.size()},
                              {"out", out_dir}});
}

void run_curate(const RunConfig& config, const std::string& manifest_path,
                const std::string& out_dir) {
  config.validate();
  const auto log_holder = make_log(out_dir);
  RunLog& log = *log_holder;
  const DrivingLogManifest manifest = load_manifest(manifest_path);
  const std::vector<CuratedSample> curated = curate_all(manifest, config, &log);

  std::vector<SamplePtr> samples;
  samples.reserve(curated.size());
  for (auto& s : curated) {
    samples.push_back(std::make_shared<CuratedSample>(s));
  }
  const std::vector<TrainingPair> pairs = make_pairs(samples, config);
  write_dataset(samples, pairs, out_dir, config.seed, config.to_json());
  log.info("curate_done", Json{{"samples", samples.size()},
                               {"pairs", pairs.size()},
                               {"out", out_dir}});
}

void run_embed(const RunConfig& config, const std::string& dataset_dir,
               const std::string& out_dir) {
  config.validate();
  const auto log_holder = make_log(out_dir);
  RunLog& log = *log_holder;
  const DatasetReadResult ds = read_dataset(dataset_dir);
  if (ds.pairs.empty()) {
    raise(ErrorCode::InvalidArgument,
          "dataset has no pairs; run curate before embed");
  }
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "rays", ec);
  if (ec) raise(ErrorCode::IoError, "cannot create " + out_dir);

  std::ofstream cond_out(fs::path(out_dir) / "conditions.jsonl");
  if (!cond_out) raise(ErrorCode::IoError, "cannot write conditions.jsonl");
  for (const auto& p : ds.pairs) {
    const std::string ray_rel =
        "rays/" + sanitize_pair_id(p.pair_id) + ".pluecker";
    write_plucker((fs::path(out_dir) / ray_rel).string(), p.rays);
    Json row;
    row["format_version"] = kFormatVersion;
    row["pair_id"] = p.pair_id;
    row["condition"] = {{"mode", pose_mode_name(p.condition.mode)},
                        {"values", p.condition.values}};
    row["rays"] = ray_rel;
    cond_out << row.dump() << "\n";
  }
  log.info("embed_done",
           Json{{"pairs", ds.pairs.size()}, {"out", out_dir}});
}

void run_train_toy(const RunConfig& config, const std::string& dataset_dir,
                   const std::string& out_dir) {
  config.validate();
  const auto log_holder = make_log(out_dir);
  RunLog& log = *log_holder;
  const DatasetReadResult ds = read_dataset(dataset_dir);
  if (ds.pairs.empty()) {
    raise(ErrorCode::InvalidArgument, "dataset has no training pairs");
  }

  std::vector<size_t> train_idx, holdout_idx;
  split_holdout(ds.pairs.size(), config.train.holdout_fraction, config.seed,
                &train_idx, &holdout_idx);
  if (train_idx.empty()) {
    raise(ErrorCode::InvalidArgument, "holdout fraction leaves no training pairs");
  }
  const std::vector<TrainingPair> train_pairs = select_indices(ds.pairs, train_idx);
  const std::vector<TrainingPair> hold_pairs = select_indices(ds.pairs, holdout_idx);

  const ToyCodec codec(config.train.latent_channels);
  const TrainResult result = train_toy(train_pairs, codec, config, &log);

  result.model.save((fs::path(out_dir) / "model.bin").string());
  write_loss_trace((fs::path(out_dir) / "loss_trace.csv").string(), result.trace);

  Json meta;
  meta["format_version"] = kFormatVersion;
  meta["seed"] = config.seed;
  meta["train_pairs"] = train_pairs.size();
  meta["holdout_pairs"] = hold_pairs.size();
  meta["parameters"] = result.model.parameter_count();
  if (!result.trace.empty()) {
    meta["initial_loss"] = result.trace.front().loss;
    meta["final_loss"] = result.trace.back().loss;
  }
  if (!hold_pairs.empty()) {
    const TrainingSet hold_set = build_training_set(hold_pairs, codec, config);
    meta["heldout_loss"] = heldout_masked_loss(
        result.model, hold_set, result.sched, config.seed, 4,
        config.effective_jobs());
  }
  write_json_file((fs::path(out_dir) / "train_meta.json").string(), meta);
  log.info("train_done", Json{{"steps", config.train.steps}, {"out", out_dir}});
}

std::string run_eval(const RunConfig& config, const std::string& dataset_dir,
                     const std::string& model_path, const std::string& out_dir) {
  config.validate();
  const auto log_holder = make_log(out_dir);
  RunLog& log = *log_holder;
  const DatasetReadResult ds = read_dataset(dataset_dir);
  if (ds.pairs.empty()) {
    raise(ErrorCode::InvalidArgument, "dataset has no pairs to evaluate");
  }
  const ToyDenoiser model = ToyDenoiser::load(model_path);
  const NoiseSchedule sched = NoiseSchedule::linear(
      config.train.timesteps, config.train.beta_start, config.train.beta_end);
  const ToyCodec codec(model.latent_channels());

  std::vector<size_t> train_idx, holdout_idx;
  split_holdout(ds.pairs.size(), config.train.holdout_fraction, config.seed,
                &train_idx, &holdout_idx);
  std::vector<size_t> chosen = config.eval.use_holdout && !holdout_idx.empty()
                                   ? holdout_idx
                                   : train_idx;
  if (config.eval.max_pairs > 0 &&
      chosen.size() > static_cast<size_t>(config.eval.max_pairs)) {
    chosen.resize(static_cast<size_t>(config.eval.max_pairs));
  }
  const std::vector<TrainingPair> eval_pairs = select_indices(ds.pairs, chosen);
  const TrainingSet set = build_training_set(eval_pairs, codec, config);

  if (config.eval.save_predictions) {
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "predictions", ec);
    if (ec) raise(ErrorCode::IoError, "cannot create " + out_dir);
  }

  std::vector<EvalRecord> records(eval_pairs.size());
  parallel_for(eval_pairs.size(), config.effective_jobs(), [&](size_t i) {
    const TrainingPair& pair = eval_pairs[i];
    const TrainItem& item = set.items[i];
    const LatentGrid z_pred = sample_view(
        model, *item.z_src, item.cond, item.rays, sched, config.eval.ddim_steps,
        seed_for(config.seed, "sample", i));
    LatentGrid unscaled = z_pred;
    for (double& v : unscaled.data) v /= config.train.latent_scale;
    ImageBuffer pred = codec.decode(unscaled);
    clamp01(pred);
    if (config.eval.save_predictions) {
      ImageBuffer quantized = pred;
      for (float& v : quantized.data) {
        v = static_cast<float>(std::lround(v * 255.0f)) / 255.0f;
      }
      write_png_rgb((fs::path(out_dir) / "predictions" /
                     (sanitize_pair_id(pair.pair_id) + ".png"))
                        .string(),
                    quantized);
    }

    const ImageBuffer valid = valid_from_trimap(pair.target->trimap);
    EvalRecord rec;
    rec.object_id = pair.target->object_id;
    rec.pair_id = pair.pair_id;
    rec.d_azimuth_deg =
        relative_orbital(pair.source->orbital, pair.target->orbital)
            .d_azimuth_rad *
        kRadToDeg;
    rec.psnr_db = psnr(pred, pair.target->crop, valid);
    rec.ssim = ssim(pred, pair.target->crop, valid);
    double valid_count = 0.0;
    for (float v : valid.data) valid_count += v != 0.0f ? 1.0 : 0.0;
    rec.valid_pixel_fraction = valid_count / static_cast<double>(valid.data.size());
    records[i] = rec;
  });

  const BucketedReport report = bucketed_report(records);
  write_records_csv((fs::path(out_dir) / "records.csv").string(), records);
  write_text_file((fs::path(out_dir) / "report.csv").string(), report.to_csv());
  const std::string table = report.to_text();
  write_text_file((fs::path(out_dir) / "report.txt").string(), table);
  log.info("eval_done", Json{{"pairs", eval_pairs.size()}, {"out", out_dir}});
  return table;
}

std::string inspect_sample(const std::string& dataset_dir,
                           const std::string& object_id,
                           const std::string& frame_id) {
  const fs::path obj_dir = fs::path(dataset_dir) / "objects" / object_id;
  const Json pose = parse_json_file((obj_dir / (frame_id + ".pose.json")).string());
  const Trimap trimap = trimap_from_buffer(
      read_png_label((obj_dir / (frame_id + ".trimap.png")).string()));

  size_t fg = 0, bg = 0, unknown = 0;
  for (TriLabel l : trimap.labels) {
    if (l == TriLabel::Foreground) ++fg;
    else if (l == TriLabel::Unknown) ++unknown;
    else ++bg;
  }
  const double total = static_cast<double>(trimap.labels.size());
  const LatentMask mask = latent_mask(trimap);

  Json out;
  out["pose"] = pose;
  out["trimap"] = {{"foreground_fraction", fg / total},
                   {"background_fraction", bg / total},
                   {"unknown_fraction", unknown / total},
                   {"latent_mask_zero_fraction", mask.zero_fraction()}};

  Json conditions = Json::array();
  const fs::path pairs_path = fs::path(dataset_dir) / "pairs.jsonl";
  if (fs::exists(pairs_path)) {
    std::ifstream in(pairs_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const Json row = Json::parse(line, nullptr, false);
      if (row.is_discarded()) continue;
      const bool as_source = row.at("source").at("object_id") == object_id &&
                             row.at("source").at("frame_id") == frame_id;
      const bool as_target = row.at("target").at("object_id") == object_id &&
                             row.at("target").at("frame_id") == frame_id;
      if (!as_source && !as_target) continue;
      conditions.push_back(Json{{"pair_id", row.at("pair_id")},
                                {"role", as_source ? "source" : "target"},
                                {"condition", row.at("condition")}});
    }
  }
  out["conditions"] = conditions;
  return out.dump(2);
}

}  // namespace dcur
