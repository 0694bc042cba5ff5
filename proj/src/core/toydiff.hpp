#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "core/curation.hpp"
#include "core/image_buffer.hpp"
#include "core/imaging.hpp"
#include "core/latent.hpp"
#include "core/occlusion.hpp"
#include "core/rng.hpp"
#include "core/run_config.hpp"

namespace dcur {

inline constexpr int kLatentFactor = 8;
inline constexpr int kLatentSize = kCropSize / kLatentFactor;  // 32

// Deterministic x8 latent codec: each 8x8x3 patch projects onto a fixed
// orthonormal basis (per-channel patch means plus seeded random completions),
// decode is the transpose reconstruction. Linear by construction, so
// latent-space masking has an exact pixel-space interpretation.
class ToyCodec {
 public:
  explicit ToyCodec(int channels = 4);

  LatentGrid encode(const ImageBuffer& img) const;
  ImageBuffer decode(const LatentGrid& z) const;

  int channels() const { return channels_; }
  // basis row c as a 192-vector over the interleaved 8x8x3 patch
  const Eigen::MatrixXd& basis() const { return basis_; }

 private:
  int channels_;
  Eigen::MatrixXd basis_;  // channels x 192, orthonormal rows
};

struct NoiseSchedule {
  int steps = 0;
  std::vector<double> betas;       // 1-based via betas[t-1]
  std::vector<double> alpha_bars;  // alpha_bars[t-1] = prod(1 - beta_i)

  static NoiseSchedule linear(int steps = 1000, double beta_start = 1e-4,
                              double beta_end = 2e-2);
  double alpha_bar(int t) const;  // alpha_bar(0) == 1
};

// sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps
LatentGrid add_noise(const LatentGrid& z0, int t, const LatentGrid& eps,
                     const NoiseSchedule& sched);

// || M(eps, m) - M(eps_hat, m) ||^2; the (1 - m) offsets cancel so this
// equals sum over cells of m * (eps - eps_hat)^2.
double masked_loss(const LatentGrid& eps, const LatentGrid& eps_hat,
                   const LatentMask& m);

// d masked_loss / d eps_hat = 2 m (eps_hat - eps); exactly 0 where m = 0.
LatentGrid masked_loss_grad(const LatentGrid& eps, const LatentGrid& eps_hat,
                            const LatentMask& m);

LatentGrid gaussian_latent(int channels, int h, int w, Rng& rng);

inline constexpr int kCondChannels = 6;
inline constexpr int kTimeChannels = 8;

// Conditioning bundle fed to the denoiser alongside z_t.
struct DenoiseContext {
  const LatentGrid* z_src = nullptr;      // latent_channels x 32 x 32
  const LatentGrid* rays = nullptr;       // 6 x 32 x 32 (may be null = zeros)
  std::vector<double> condition;          // <= kCondChannels, zero padded
  int t = 1;
};

// Three 3x3 conv layers with ReLU between them, trained by plain SGD.
// Inputs: z_t, z_src, ray channels, broadcast global condition, and a
// sinusoidal timestep embedding. Well under 1M parameters.
class ToyDenoiser {
 public:
  ToyDenoiser() = default;
  ToyDenoiser(int latent_channels, int hidden_channels, int timesteps,
              uint64_t init_seed);

  int latent_channels() const { return latent_channels_; }
  int hidden_channels() const { return hidden_channels_; }
  int timesteps() const { return timesteps_; }
  size_t parameter_count() const;

  LatentGrid forward(const LatentGrid& z_t, const DenoiseContext& ctx) const;

  struct Gradients {
    Eigen::MatrixXd w1, w2, w3;
    Eigen::VectorXd b1, b2, b3;
    void init_like(const ToyDenoiser& net);
    void add(const Gradients& other);
    void scale(double s);
  };

  // Forward pass plus backprop of d(masked_loss)/d eps_hat; adds parameter
  // gradients into `grads` and returns the sample's masked loss.
  double forward_backward(const LatentGrid& z_t, const DenoiseContext& ctx,
                          const LatentGrid& eps_target, const LatentMask& mask,
                          Gradients& grads) const;

  void apply_update(const Gradients& grads, double lr);

  void save(const std::string& path) const;
  static ToyDenoiser load(const std::string& path);

 private:
  LatentGrid assemble_input(const LatentGrid& z_t,
                            const DenoiseContext& ctx) const;

  int latent_channels_ = 4;
  int hidden_channels_ = 16;
  int timesteps_ = 1000;
  int in_channels_ = 0;
  Eigen::MatrixXd w1_, w2_, w3_;  // [out, in*9]
  Eigen::VectorXd b1_, b2_, b3_;
};

// Precomputed per-pair tensors for training/eval; the flipped variants carry
// the symmetric counterpart of the source view.
struct TrainItem {
  const LatentGrid* z_src = nullptr;
  const LatentGrid* z_src_flipped = nullptr;
  const LatentGrid* z_trg = nullptr;
  LatentGrid rays;
  LatentGrid rays_flipped;
  std::vector<double> cond;
  std::vector<double> cond_flipped;
  LatentMask mask;
  std::string pair_id;
};

// Owns the encoded latents referenced by its items.
struct TrainingSet {
  std::vector<TrainItem> items;
  std::vector<std::unique_ptr<LatentGrid>> storage;
};

// Encodes crops (scaled by train.latent_scale), builds condition/ray tensors
// for both orientations, and applies the use_mask / ablate_pose switches.
TrainingSet build_training_set(const std::vector<TrainingPair>& pairs,
                               const ToyCodec& codec, const RunConfig& config);

struct TraceRow {
  int step = 0;
  double loss = 0.0;
  double masked_fraction = 0.0;  // fraction of latent cells excluded
};

struct TrainResult {
  ToyDenoiser model;
  NoiseSchedule sched;
  std::vector<TraceRow> trace;
};

// Seeded SGD over compose_batches output; per-slot gradients are computed in
// parallel and reduced in ascending slot order (pairwise tree), so results
// are independent of the worker count. Loss trace rows use the mean
// per-element masked loss. Throws DivergedLoss on non-finite loss.
TrainResult train_toy(const std::vector<TrainingPair>& train_pairs,
                      const ToyCodec& codec, const RunConfig& config,
                      RunLog* log = nullptr);

// Mean per-element masked loss over items with deterministic (t, eps) draws;
// the comparison currency for held-out evaluation.
double heldout_masked_loss(const ToyDenoiser& model, const TrainingSet& set,
                           const NoiseSchedule& sched, uint64_t seed,
                           int draws_per_item = 4, int jobs = 1);

// Deterministic DDIM (eta = 0) sampling from seeded noise; steps = 0 returns
// the seeded noise unchanged.
LatentGrid sample_view(const ToyDenoiser& model, const LatentGrid& z_src,
                       const std::vector<double>& condition,
                       const LatentGrid& rays, const NoiseSchedule& sched,
                       int steps, uint64_t seed);

// Seeded split of pair indices into (train, holdout).
void split_holdout(size_t pair_count, double holdout_fraction, uint64_t seed,
                   std::vector<size_t>* train_idx,
                   std::vector<size_t>* holdout_idx);

void write_loss_trace(const std::string& path,
                      const std::vector<TraceRow>& trace);

}  // namespace dcur
