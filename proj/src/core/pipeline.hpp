#pragma once

#include <string>

#include "core/run_config.hpp"

namespace dcur {

// Batch entry points backing the CLI subcommands. Every artifact they write
// is a deterministic function of (inputs, config, seed); the run_log.jsonl
// sidecar is the only timestamped output.

void run_synth(const RunConfig& config, const std::string& out_dir);

void run_curate(const RunConfig& config, const std::string& manifest_path,
                const std::string& out_dir);

void run_embed(const RunConfig& config, const std::string& dataset_dir,
               const std::string& out_dir);

void run_train_toy(const RunConfig& config, const std::string& dataset_dir,
                   const std::string& out_dir);

// Returns the rendered report table (also written to <out>/report.txt).
std::string run_eval(const RunConfig& config, const std::string& dataset_dir,
                     const std::string& model_path, const std::string& out_dir);

// Pose, trimap statistics, and the conditions of every pair touching the
// sample, as a JSON string.
std::string inspect_sample(const std::string& dataset_dir,
                           const std::string& object_id,
                           const std::string& frame_id);

std::string sanitize_pair_id(const std::string& pair_id);

}  // namespace dcur
