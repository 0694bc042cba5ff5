#include "core/toydiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>

#include "core/parallel.hpp"

namespace dcur {

namespace {

constexpr uint64_t kCodecBasisSeed = 0x6f72626974616c31ULL;
constexpr int kPatch = kLatentFactor;
constexpr int kPatchDim = kPatch * kPatch * 3;  // 192

}  // namespace

ToyCodec::ToyCodec(int channels) : channels_(channels) {
  if (channels < 1 || channels > 16) {
    raise(ErrorCode::InvalidArgument, "codec channels must be in [1, 16]");
  }
  basis_ = Eigen::MatrixXd::Zero(channels, kPatchDim);

  // First rows: per-color patch means, so patch-constant colors reconstruct
  // exactly. Remaining rows: seeded random directions orthonormalized against
  // everything before them (frozen at construction).
  const int mean_rows = std::min(channels, 3);
  for (int c = 0; c < mean_rows; ++c) {
    for (int p = 0; p < kPatch * kPatch; ++p) {
      basis_(c, p * 3 + c) = 1.0 / kPatch;  // 64 entries of 1/8: unit norm
    }
  }
  Rng rng(kCodecBasisSeed);
  for (int r = mean_rows; r < channels; ++r) {
    Eigen::VectorXd v(kPatchDim);
    for (int i = 0; i < kPatchDim; ++i) v(i) = rng.normal();
    for (int prev = 0; prev < r; ++prev) {
      v -= basis_.row(prev).dot(v) * basis_.row(prev).transpose();
    }
    const double n = v.norm();
    if (n < 1e-9) raise(ErrorCode::Internal, "codec basis degenerated");
    basis_.row(r) = v.transpose() / n;
  }
}

LatentGrid ToyCodec::encode(const ImageBuffer& img) const {
  if (img.width != kCropSize || img.height != kCropSize || img.channels != 3) {
    raise(ErrorCode::ShapeMismatch, "toy codec expects a 256x256 RGB image");
  }
  LatentGrid z(channels_, kLatentSize, kLatentSize);
  Eigen::VectorXd patch(kPatchDim);
  for (int gy = 0; gy < kLatentSize; ++gy) {
    for (int gx = 0; gx < kLatentSize; ++gx) {
      for (int py = 0; py < kPatch; ++py) {
        for (int px = 0; px < kPatch; ++px) {
          for (int c = 0; c < 3; ++c) {
            patch((py * kPatch + px) * 3 + c) =
                img.at(gx * kPatch + px, gy * kPatch + py, c);
          }
        }
      }
      const Eigen::VectorXd coeff = basis_ * patch;
      for (int c = 0; c < channels_; ++c) z.at(c, gy, gx) = coeff(c);
    }
  }
  return z;
}

ImageBuffer ToyCodec::decode(const LatentGrid& z) const {
  if (z.channels != channels_ || z.h != kLatentSize || z.w != kLatentSize) {
    raise(ErrorCode::ShapeMismatch, "latent grid shape does not match codec");
  }
  ImageBuffer img(kCropSize, kCropSize, 3);
  Eigen::VectorXd coeff(channels_);
  for (int gy = 0; gy < kLatentSize; ++gy) {
    for (int gx = 0; gx < kLatentSize; ++gx) {
      for (int c = 0; c < channels_; ++c) coeff(c) = z.at(c, gy, gx);
      const Eigen::VectorXd patch = basis_.transpose() * coeff;
      for (int py = 0; py < kPatch; ++py) {
        for (int px = 0; px < kPatch; ++px) {
          for (int c = 0; c < 3; ++c) {
            img.at(gx * kPatch + px, gy * kPatch + py, c) =
                static_cast<float>(patch((py * kPatch + px) * 3 + c));
          }
        }
      }
    }
  }
  return img;
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start,
                                    double beta_end) {
  if (steps < 1 || !(beta_start > 0.0) || beta_start > beta_end ||
      !(beta_end < 1.0)) {
    raise(ErrorCode::InvalidArgument, "invalid noise schedule parameters");
  }
  NoiseSchedule s;
  s.steps = steps;
  s.betas.resize(steps);
  s.alpha_bars.resize(steps);
  double abar = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double beta =
        steps == 1 ? beta_start
                   : beta_start + (beta_end - beta_start) * t / (steps - 1);
    s.betas[t] = beta;
    abar *= 1.0 - beta;
    s.alpha_bars[t] = abar;
  }
  return s;
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  if (t < 1 || t > steps) {
    raise(ErrorCode::InvalidArgument, "timestep out of range");
  }
  return alpha_bars[t - 1];
}

LatentGrid add_noise(const LatentGrid& z0, int t, const LatentGrid& eps,
                     const NoiseSchedule& sched) {
  if (!z0.same_shape(eps)) {
    raise(ErrorCode::ShapeMismatch, "add_noise: z0 and eps differ in shape");
  }
  const double abar = sched.alpha_bar(t);
  const double a = std::sqrt(abar);
  const double b = std::sqrt(1.0 - abar);
  LatentGrid out(z0.channels, z0.h, z0.w);
  for (size_t i = 0; i < z0.data.size(); ++i) {
    out.data[i] = a * z0.data[i] + b * eps.data[i];
  }
  return out;
}

namespace {

void check_loss_shapes(const LatentGrid& eps, const LatentGrid& eps_hat,
                       const LatentMask& m) {
  if (!eps.same_shape(eps_hat) || eps.h != m.h || eps.w != m.w) {
    raise(ErrorCode::ShapeMismatch, "masked loss operands differ in shape");
  }
}

}  // namespace

double masked_loss(const LatentGrid& eps, const LatentGrid& eps_hat,
                   const LatentMask& m) {
  check_loss_shapes(eps, eps_hat, m);
  double sum = 0.0;
  for (int c = 0; c < eps.channels; ++c) {
    for (int y = 0; y < eps.h; ++y) {
      for (int x = 0; x < eps.w; ++x) {
        const double mv = m.at(y, x);
        const double a = eps.at(c, y, x) * mv + (1.0 - mv);
        const double b = eps_hat.at(c, y, x) * mv + (1.0 - mv);
        sum += (a - b) * (a - b);
      }
    }
  }
  return sum;
}

LatentGrid masked_loss_grad(const LatentGrid& eps, const LatentGrid& eps_hat,
                            const LatentMask& m) {
  check_loss_shapes(eps, eps_hat, m);
  LatentGrid g(eps.channels, eps.h, eps.w);
  for (int c = 0; c < eps.channels; ++c) {
    for (int y = 0; y < eps.h; ++y) {
      for (int x = 0; x < eps.w; ++x) {
        const double mv = m.at(y, x);
        g.at(c, y, x) = 2.0 * mv * (eps_hat.at(c, y, x) - eps.at(c, y, x));
      }
    }
  }
  return g;
}

LatentGrid gaussian_latent(int channels, int h, int w, Rng& rng) {
  LatentGrid z(channels, h, w);
  for (double& v : z.data) v = rng.normal();
  return z;
}

// ---------------------------------------------------------------------------
// denoiser

namespace {

void im2col(const LatentGrid& in, Eigen::MatrixXd& cols) {
  const int n = in.h * in.w;
  cols.resize(in.channels * 9, n);
  for (int c = 0; c < in.channels; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const int row = c * 9 + ky * 3 + kx;
        for (int y = 0; y < in.h; ++y) {
          const int sy = y + ky - 1;
          for (int x = 0; x < in.w; ++x) {
            const int sx = x + kx - 1;
            cols(row, y * in.w + x) =
                (sy < 0 || sy >= in.h || sx < 0 || sx >= in.w)
                    ? 0.0
                    : in.at(c, sy, sx);
          }
        }
      }
    }
  }
}

void col2im_add(const Eigen::MatrixXd& cols, LatentGrid& out) {
  for (int c = 0; c < out.channels; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const int row = c * 9 + ky * 3 + kx;
        for (int y = 0; y < out.h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= out.h) continue;
          for (int x = 0; x < out.w; ++x) {
            const int sx = x + kx - 1;
            if (sx < 0 || sx >= out.w) continue;
            out.at(c, sy, sx) += cols(row, y * out.w + x);
          }
        }
      }
    }
  }
}

LatentGrid matrix_to_grid(const Eigen::MatrixXd& m, int h, int w) {
  LatentGrid g(static_cast<int>(m.rows()), h, w);
  for (int c = 0; c < g.channels; ++c) {
    for (int i = 0; i < h * w; ++i) g.data[static_cast<size_t>(c) * h * w + i] = m(c, i);
  }
  return g;
}

Eigen::MatrixXd grid_to_matrix(const LatentGrid& g) {
  Eigen::MatrixXd m(g.channels, g.h * g.w);
  for (int c = 0; c < g.channels; ++c) {
    for (int i = 0; i < g.h * g.w; ++i) m(c, i) = g.data[static_cast<size_t>(c) * g.h * g.w + i];
  }
  return m;
}

}  // namespace

ToyDenoiser::ToyDenoiser(int latent_channels, int hidden_channels,
                         int timesteps, uint64_t init_seed)
    : latent_channels_(latent_channels), hidden_channels_(hidden_channels),
      timesteps_(timesteps) {
  in_channels_ = 2 * latent_channels_ + 6 + kCondChannels + kTimeChannels;
  Rng rng(init_seed);
  auto init = [&](Eigen::MatrixXd& w, Eigen::VectorXd& b, int out, int in9) {
    const double limit = std::sqrt(6.0 / in9);
    w.resize(out, in9);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in9; ++c) w(r, c) = rng.uniform(-limit, limit);
    }
    b = Eigen::VectorXd::Zero(out);
  };
  init(w1_, b1_, hidden_channels_, in_channels_ * 9);
  init(w2_, b2_, hidden_channels_, hidden_channels_ * 9);
  init(w3_, b3_, latent_channels_, hidden_channels_ * 9);
}

size_t ToyDenoiser::parameter_count() const {
  return static_cast<size_t>(w1_.size()) + b1_.size() + w2_.size() +
         b2_.size() + w3_.size() + b3_.size();
}

LatentGrid ToyDenoiser::assemble_input(const LatentGrid& z_t,
                                       const DenoiseContext& ctx) const {
  if (z_t.channels != latent_channels_ || z_t.h != kLatentSize ||
      z_t.w != kLatentSize) {
    raise(ErrorCode::ShapeMismatch, "denoiser latent shape mismatch");
  }
  if (!ctx.z_src || !ctx.z_src->same_shape(z_t)) {
    raise(ErrorCode::ShapeMismatch, "denoiser source latent shape mismatch");
  }
  if (ctx.rays && (ctx.rays->channels != 6 || ctx.rays->h != z_t.h ||
                   ctx.rays->w != z_t.w)) {
    raise(ErrorCode::ShapeMismatch, "denoiser ray grid shape mismatch");
  }
  if (ctx.condition.size() > kCondChannels) {
    raise(ErrorCode::ShapeMismatch, "condition vector longer than 6");
  }

  LatentGrid in(in_channels_, z_t.h, z_t.w);
  const int plane = z_t.h * z_t.w;
  int ch = 0;
  auto copy_grid = [&](const LatentGrid& g) {
    std::memcpy(&in.data[static_cast<size_t>(ch) * plane], g.data.data(),
                g.data.size() * sizeof(double));
    ch += g.channels;
  };
  copy_grid(z_t);
  copy_grid(*ctx.z_src);
  if (ctx.rays) {
    copy_grid(*ctx.rays);
  } else {
    ch += 6;
  }
  for (size_t i = 0; i < ctx.condition.size(); ++i) {
    std::fill_n(&in.data[static_cast<size_t>(ch + i) * plane], plane,
                ctx.condition[i]);
  }
  ch += kCondChannels;
  const double t_norm = static_cast<double>(ctx.t) / timesteps_;
  for (int k = 0; k < kTimeChannels / 2; ++k) {
    const double phase = 2.0 * kPi * t_norm * (1 << k);
    std::fill_n(&in.data[static_cast<size_t>(ch + 2 * k) * plane], plane,
                std::sin(phase));
    std::fill_n(&in.data[static_cast<size_t>(ch + 2 * k + 1) * plane], plane,
                std::cos(phase));
  }
  return in;
}

LatentGrid ToyDenoiser::forward(const LatentGrid& z_t,
                                const DenoiseContext& ctx) const {
  const LatentGrid input = assemble_input(z_t, ctx);
  Eigen::MatrixXd cols;
  im2col(input, cols);
  Eigen::MatrixXd a1 = (w1_ * cols).colwise() + b1_;
  a1 = a1.cwiseMax(0.0);
  im2col(matrix_to_grid(a1, z_t.h, z_t.w), cols);
  Eigen::MatrixXd a2 = (w2_ * cols).colwise() + b2_;
  a2 = a2.cwiseMax(0.0);
  im2col(matrix_to_grid(a2, z_t.h, z_t.w), cols);
  const Eigen::MatrixXd y3 = (w3_ * cols).colwise() + b3_;
  return matrix_to_grid(y3, z_t.h, z_t.w);
}

void ToyDenoiser::Gradients::init_like(const ToyDenoiser& net) {
  w1 = Eigen::MatrixXd::Zero(net.w1_.rows(), net.w1_.cols());
  w2 = Eigen::MatrixXd::Zero(net.w2_.rows(), net.w2_.cols());
  w3 = Eigen::MatrixXd::Zero(net.w3_.rows(), net.w3_.cols());
  b1 = Eigen::VectorXd::Zero(net.b1_.size());
  b2 = Eigen::VectorXd::Zero(net.b2_.size());
  b3 = Eigen::VectorXd::Zero(net.b3_.size());
}

void ToyDenoiser::Gradients::add(const Gradients& other) {
  w1 += other.w1;
  w2 += other.w2;
  w3 += other.w3;
  b1 += other.b1;
  b2 += other.b2;
  b3 += other.b3;
}

void ToyDenoiser::Gradients::scale(double s) {
  w1 *= s;
  w2 *= s;
  w3 *= s;
  b1 *= s;
  b2 *= s;
  b3 *= s;
}

double ToyDenoiser::forward_backward(const LatentGrid& z_t,
                                     const DenoiseContext& ctx,
                                     const LatentGrid& eps_target,
                                     const LatentMask& mask,
                                     Gradients& grads) const {
  const LatentGrid input = assemble_input(z_t, ctx);
  const int h = z_t.h, w = z_t.w;

  Eigen::MatrixXd cols1, cols2, cols3;
  im2col(input, cols1);
  Eigen::MatrixXd a1 = (w1_ * cols1).colwise() + b1_;
  a1 = a1.cwiseMax(0.0);
  im2col(matrix_to_grid(a1, h, w), cols2);
  Eigen::MatrixXd a2 = (w2_ * cols2).colwise() + b2_;
  a2 = a2.cwiseMax(0.0);
  im2col(matrix_to_grid(a2, h, w), cols3);
  const Eigen::MatrixXd y3 = (w3_ * cols3).colwise() + b3_;

  const LatentGrid eps_hat = matrix_to_grid(y3, h, w);
  const double loss = masked_loss(eps_target, eps_hat, mask);
  const LatentGrid dloss = masked_loss_grad(eps_target, eps_hat, mask);
  const Eigen::MatrixXd dy3 = grid_to_matrix(dloss);

  grads.w3 += dy3 * cols3.transpose();
  grads.b3 += dy3.rowwise().sum();
  LatentGrid da2_grid(hidden_channels_, h, w);
  col2im_add(w3_.transpose() * dy3, da2_grid);
  Eigen::MatrixXd dy2 = grid_to_matrix(da2_grid);
  dy2 = dy2.cwiseProduct((a2.array() > 0.0).cast<double>().matrix());

  grads.w2 += dy2 * cols2.transpose();
  grads.b2 += dy2.rowwise().sum();
  LatentGrid da1_grid(hidden_channels_, h, w);
  col2im_add(w2_.transpose() * dy2, da1_grid);
  Eigen::MatrixXd dy1 = grid_to_matrix(da1_grid);
  dy1 = dy1.cwiseProduct((a1.array() > 0.0).cast<double>().matrix());

  grads.w1 += dy1 * cols1.transpose();
  grads.b1 += dy1.rowwise().sum();
  return loss;
}

void ToyDenoiser::apply_update(const Gradients& grads, double lr) {
  w1_ -= lr * grads.w1;
  w2_ -= lr * grads.w2;
  w3_ -= lr * grads.w3;
  b1_ -= lr * grads.b1;
  b2_ -= lr * grads.b2;
  b3_ -= lr * grads.b3;
}

namespace {

constexpr char kCheckpointMagic[8] = {'D', 'C', 'T', 'O', 'Y', 'N', 'E', 'T'};
constexpr uint32_t kCheckpointVersion = 1;

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  const uint32_t rows = static_cast<uint32_t>(m.rows());
  const uint32_t cols = static_cast<uint32_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&rows), 4);
  out.write(reinterpret_cast<const char*>(&cols), 4);
  for (uint32_t r = 0; r < rows; ++r) {
    for (uint32_t c = 0; c < cols; ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
  }
}

Eigen::MatrixXd read_matrix(std::ifstream& in, const std::string& path) {
  uint32_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), 4);
  in.read(reinterpret_cast<char*>(&cols), 4);
  if (!in || rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20)) {
    raise(ErrorCode::ParseError, "corrupt tensor header in " + path);
  }
  Eigen::MatrixXd m(rows, cols);
  for (uint32_t r = 0; r < rows; ++r) {
    for (uint32_t c = 0; c < cols; ++c) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), 8);
      m(r, c) = v;
    }
  }
  if (!in) raise(ErrorCode::ParseError, "truncated tensor data in " + path);
  return m;
}

}  // namespace

void ToyDenoiser::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot open for writing: " + path);
  out.write(kCheckpointMagic, 8);
  out.write(reinterpret_cast<const char*>(&kCheckpointVersion), 4);
  const int32_t meta[3] = {latent_channels_, hidden_channels_, timesteps_};
  out.write(reinterpret_cast<const char*>(meta), sizeof(meta));
  write_matrix(out, w1_);
  write_matrix(out, b1_);
  write_matrix(out, w2_);
  write_matrix(out, b2_);
  write_matrix(out, w3_);
  write_matrix(out, b3_);
  if (!out) raise(ErrorCode::IoError, "write failed: " + path);
}

ToyDenoiser ToyDenoiser::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open for reading: " + path);
  char magic[8] = {};
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    raise(ErrorCode::ParseError, "not a toy denoiser checkpoint: " + path);
  }
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != kCheckpointVersion) {
    raise(ErrorCode::VersionMismatch,
          "checkpoint version " + std::to_string(version) + " not supported");
  }
  int32_t meta[3] = {};
  in.read(reinterpret_cast<char*>(meta), sizeof(meta));
  ToyDenoiser net;
  net.latent_channels_ = meta[0];
  net.hidden_channels_ = meta[1];
  net.timesteps_ = meta[2];
  net.in_channels_ = 2 * meta[0] + 6 + kCondChannels + kTimeChannels;
  net.w1_ = read_matrix(in, path);
  net.b1_ = read_matrix(in, path).col(0);
  net.w2_ = read_matrix(in, path);
  net.b2_ = read_matrix(in, path).col(0);
  net.w3_ = read_matrix(in, path);
  net.b3_ = read_matrix(in, path).col(0);
  if (net.w1_.rows() != net.hidden_channels_ ||
      net.w1_.cols() != net.in_channels_ * 9) {
    raise(ErrorCode::ParseError, "checkpoint tensor shapes inconsistent");
  }
  return net;
}

// ---------------------------------------------------------------------------
// training

namespace {

std::vector<double> pad_condition(const GlobalPoseCondition& cond) {
  std::vector<double> v(kCondChannels, 0.0);
  for (size_t i = 0; i < cond.values.size() && i < kCondChannels; ++i) {
    v[i] = cond.values[i];
  }
  return v;
}

LatentGrid plucker_to_grid(const PluckerMap& map) {
  LatentGrid g(6, map.height, map.width);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const double* p = map.pixel(x, y);
      for (int c = 0; c < 6; ++c) g.at(c, y, x) = p[c];
    }
  }
  return g;
}

void scale_grid(LatentGrid& g, double s) {
  for (double& v : g.data) v *= s;
}

}  // namespace

TrainingSet build_training_set(const std::vector<TrainingPair>& pairs,
                               const ToyCodec& codec, const RunConfig& config) {
  TrainingSet set;
  const double scale = config.train.latent_scale;
  std::map<std::pair<const CuratedSample*, bool>, const LatentGrid*> cache;

  auto encoded = [&](const SamplePtr& sample, bool flipped) {
    const auto key = std::make_pair(sample.get(), flipped);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    LatentGrid z = codec.encode(flipped ? hflip(sample->crop) : sample->crop);
    scale_grid(z, scale);
    set.storage.push_back(std::make_unique<LatentGrid>(std::move(z)));
    cache[key] = set.storage.back().get();
    return cache[key];
  };

  for (const auto& p : pairs) {
    TrainItem item;
    item.pair_id = p.pair_id;
    item.z_src = encoded(p.source, false);
    item.z_src_flipped = encoded(p.source, true);
    item.z_trg = encoded(p.target, false);

    if (config.train.ablate_pose) {
      item.rays = LatentGrid(6, kLatentSize, kLatentSize);
      item.rays_flipped = LatentGrid(6, kLatentSize, kLatentSize);
      item.cond.assign(kCondChannels, 0.0);
      item.cond_flipped.assign(kCondChannels, 0.0);
    } else {
      item.rays = plucker_to_grid(p.rays);
      item.cond = pad_condition(p.condition);
      OrbitalPose flipped_src = p.source->orbital;
      flipped_src.azimuth_rad = wrap_angle(-flipped_src.azimuth_rad);
      const PairPayload flipped = make_pair_payload(
          flipped_src, p.target->orbital, p.target->crop_intrinsics,
          config.pose_mode, config.cond_distance_scale);
      item.rays_flipped = plucker_to_grid(flipped.rays);
      item.cond_flipped = pad_condition(flipped.condition);
    }

    if (config.train.use_mask) {
      item.mask = p.target_mask;
    } else {
      item.mask.h = kLatentSize;
      item.mask.w = kLatentSize;
      item.mask.values.assign(static_cast<size_t>(kLatentSize) * kLatentSize,
                              1.0);
    }
    set.items.push_back(std::move(item));
  }
  return set;
}

TrainResult train_toy(const std::vector<TrainingPair>& train_pairs,
                      const ToyCodec& codec, const RunConfig& config,
                      RunLog* log) {
  if (train_pairs.empty()) {
    raise(ErrorCode::InvalidArgument, "train_toy: no training pairs");
  }
  const TrainConfig& tc = config.train;
  TrainResult result;
  result.sched = NoiseSchedule::linear(tc.timesteps, tc.beta_start, tc.beta_end);
  result.model = ToyDenoiser(tc.latent_channels, tc.hidden_channels,
                             tc.timesteps, seed_for(config.seed, "model_init"));

  const TrainingSet set = build_training_set(train_pairs, codec, config);
  const double norm =
      static_cast<double>(tc.latent_channels) * kLatentSize * kLatentSize;
  const int jobs = config.effective_jobs();

  std::vector<Batch> batches;
  size_t batch_cursor = 0;
  int epoch = 0;

  for (int step = 1; step <= tc.steps; ++step) {
    if (batch_cursor >= batches.size()) {
      batches = compose_batches(train_pairs, config.guidance, tc.batch_size,
                                seed_for(config.seed, "epoch", epoch));
      batch_cursor = 0;
      ++epoch;
    }
    const Batch& batch = batches[batch_cursor++];
    const size_t nslots = batch.slots.size();

    // Slot noise draws happen serially up front so parallel gradient
    // evaluation cannot perturb the random stream.
    Rng step_rng(seed_for(config.seed, "step", static_cast<uint64_t>(step)));
    std::vector<int> ts(nslots);
    std::vector<LatentGrid> zts(nslots);
    std::vector<LatentGrid> eps(nslots);
    for (size_t i = 0; i < nslots; ++i) {
      ts[i] = static_cast<int>(step_rng.uniform_int(1, tc.timesteps));
      eps[i] = gaussian_latent(tc.latent_channels, kLatentSize, kLatentSize,
                               step_rng);
      const TrainItem& item = set.items[batch.slots[i].pair_index];
      zts[i] = add_noise(*item.z_trg, ts[i], eps[i], result.sched);
    }

    std::vector<ToyDenoiser::Gradients> slot_grads(nslots);
    std::vector<double> slot_loss(nslots, 0.0);
    parallel_for(nslots, jobs, [&](size_t i) {
      const BatchSlot& slot = batch.slots[i];
      const TrainItem& item = set.items[slot.pair_index];
      DenoiseContext ctx;
      ctx.z_src = slot.source_flipped ? item.z_src_flipped : item.z_src;
      ctx.rays = slot.source_flipped ? &item.rays_flipped : &item.rays;
      ctx.condition = slot.source_flipped ? item.cond_flipped : item.cond;
      ctx.t = ts[i];
      slot_grads[i].init_like(result.model);
      slot_loss[i] = result.model.forward_backward(zts[i], ctx, eps[i],
                                                   item.mask, slot_grads[i]);
    });

    // Ascending pairwise tree reduction; fixed order regardless of jobs.
    std::vector<ToyDenoiser::Gradients>& tree = slot_grads;
    size_t active = nslots;
    while (active > 1) {
      size_t next = 0;
      for (size_t i = 0; i + 1 < active; i += 2) {
        tree[i].add(tree[i + 1]);
        tree[next++] = std::move(tree[i]);
      }
      if (active % 2 == 1) tree[next++] = std::move(tree[active - 1]);
      active = next;
    }
    tree[0].scale(1.0 / (norm * static_cast<double>(nslots)));

    double loss_sum = 0.0;
    double masked_sum = 0.0;
    for (size_t i = 0; i < nslots; ++i) {
      loss_sum += slot_loss[i];
      masked_sum += set.items[batch.slots[i].pair_index].mask.zero_fraction();
    }
    const double loss = loss_sum / (norm * static_cast<double>(nslots));
    if (!std::isfinite(loss)) {
      raise(ErrorCode::DivergedLoss,
            "loss became non-finite at step " + std::to_string(step));
    }

    result.model.apply_update(tree[0], tc.learning_rate);
    result.trace.push_back(
        {step, loss, masked_sum / static_cast<double>(nslots)});
    if (log && (step % 100 == 0 || step == tc.steps)) {
      log->debug("train_step", Json{{"step", step}, {"loss", loss}});
    }
  }
  return result;
}

double heldout_masked_loss(const ToyDenoiser& model, const TrainingSet& set,
                           const NoiseSchedule& sched, uint64_t seed,
                           int draws_per_item, int jobs) {
  if (set.items.empty()) {
    raise(ErrorCode::InvalidArgument, "heldout_masked_loss: no items");
  }
  const double norm = static_cast<double>(model.latent_channels()) *
                      kLatentSize * kLatentSize;
  std::vector<double> per_item(set.items.size(), 0.0);
  parallel_for(set.items.size(), jobs, [&](size_t i) {
    const TrainItem& item = set.items[i];
    Rng rng(seed_for(seed, "heldout", i));
    double sum = 0.0;
    for (int d = 0; d < draws_per_item; ++d) {
      const int t = static_cast<int>(rng.uniform_int(1, sched.steps));
      const LatentGrid eps = gaussian_latent(model.latent_channels(),
                                             kLatentSize, kLatentSize, rng);
      const LatentGrid z_t = add_noise(*item.z_trg, t, eps, sched);
      DenoiseContext ctx;
      ctx.z_src = item.z_src;
      ctx.rays = &item.rays;
      ctx.condition = item.cond;
      ctx.t = t;
      const LatentGrid eps_hat = model.forward(z_t, ctx);
      sum += masked_loss(eps, eps_hat, item.mask) / norm;
    }
    per_item[i] = sum / draws_per_item;
  });
  double total = 0.0;
  for (double v : per_item) total += v;
  return total / static_cast<double>(per_item.size());
}

LatentGrid sample_view(const ToyDenoiser& model, const LatentGrid& z_src,
                       const std::vector<double>& condition,
                       const LatentGrid& rays, const NoiseSchedule& sched,
                       int steps, uint64_t seed) {
  if (steps < 0 || steps > sched.steps) {
    raise(ErrorCode::InvalidArgument, "sample_view: steps out of range");
  }
  Rng rng(seed);
  LatentGrid z = gaussian_latent(z_src.channels, z_src.h, z_src.w, rng);
  if (steps == 0) return z;

  DenoiseContext ctx;
  ctx.z_src = &z_src;
  ctx.rays = &rays;
  ctx.condition = condition;

  for (int i = 0; i < steps; ++i) {
    const int t = std::max(
        1, static_cast<int>(std::llround(
               static_cast<double>(sched.steps) * (steps - i) / steps)));
    const int t_prev =
        i + 1 < steps
            ? std::max(1, static_cast<int>(std::llround(
                              static_cast<double>(sched.steps) * (steps - i - 1) /
                              steps)))
            : 0;
    ctx.t = t;
    const LatentGrid eps_hat = model.forward(z, ctx);
    const double abar = sched.alpha_bar(t);
    const double abar_prev = sched.alpha_bar(t_prev);
    const double inv_sqrt = 1.0 / std::sqrt(abar);
    const double noise_coeff = std::sqrt(1.0 - abar);
    const double a = std::sqrt(abar_prev);
    const double b = std::sqrt(1.0 - abar_prev);
    for (size_t k = 0; k < z.data.size(); ++k) {
      const double z0 = (z.data[k] - noise_coeff * eps_hat.data[k]) * inv_sqrt;
      z.data[k] = a * z0 + b * eps_hat.data[k];
    }
  }
  return z;
}

void split_holdout(size_t pair_count, double holdout_fraction, uint64_t seed,
                   std::vector<size_t>* train_idx,
                   std::vector<size_t>* holdout_idx) {
  std::vector<size_t> order(pair_count);
  for (size_t i = 0; i < pair_count; ++i) order[i] = i;
  Rng rng(seed_for(seed, "holdout_split"));
  rng.shuffle(order);
  const size_t n_hold = static_cast<size_t>(
      std::llround(holdout_fraction * static_cast<double>(pair_count)));
  holdout_idx->assign(order.begin(), order.begin() + n_hold);
  train_idx->assign(order.begin() + n_hold, order.end());
  std::sort(holdout_idx->begin(), holdout_idx->end());
  std::sort(train_idx->begin(), train_idx->end());
}

void write_loss_trace(const std::string& path,
                      const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot open for writing: " + path);
  out << "step,loss,masked_fraction\n";
  char buf[128];
  for (const auto& row : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", row.step, row.loss,
                  row.masked_fraction);
    out << buf;
  }
  if (!out) raise(ErrorCode::IoError, "write failed: " + path);
}

}  // namespace dcur
