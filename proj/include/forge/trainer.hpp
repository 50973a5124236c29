#pragma once

#include "forge/checkpoint.hpp"
#include "forge/config.hpp"
#include "forge/diffuse_guess.hpp"
#include "forge/feature_extractor.hpp"
#include "forge/image.hpp"
#include "forge/losses.hpp"
#include "forge/networks.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace forge {

/// Training hyperparameters. Defaults are the published operating point:
/// Adam at 2e-5, 10k pretrain / 3k fine-tune / 20k from-scratch iterations,
/// 256 tiles. The bench CLI swaps in desk-scale values unless --paper-scale
/// is given.
struct TrainConfig {
  LossWeights<float> weights;
  float learning_rate = 2e-5f;
  int pretrain_iters = 10000;
  int finetune_iters = 3000;
  int scratch_iters = 20000;
  int tile_size = 256;
  uint64_t seed = 0;
  float adam_beta1 = 0.5f;
  float adam_beta2 = 0.999f;
  FourierFlags fourier;
  bool augment = true;
  int disc_steps = 1;
  int base_channels = 64;
  std::string perceptual_weights_path;

  void validate() const;

  /// Architecture/tile compatibility token stored in checkpoints; iteration
  /// counts and loss weights may differ between pretrain and fine-tune.
  uint64_t fingerprint() const;

  /// Applies the documented config-file keys on top of this config.
  void apply(const ConfigFile& file);
};

/// Axis-aligned tile crop plus the label-free augmentations (stationarity
/// makes 90-degree rotations and flips valid).
struct Crop {
  int oy = 0, ox = 0;
  int rot = 0;      // quarter turns, 0..3
  bool flip = false;
};

Crop sample_crop(int photo_h, int photo_w, int tile, std::mt19937_64& rng, bool augment);
Tensor<float> apply_crop(const Tensor<float>& src, const Crop& crop, int tile);
LdrImage<float> sample_tile(const LdrImage<float>& photo, int tile, std::mt19937_64& rng,
                            bool augment = true, Crop* out_crop = nullptr);

/// Thrown when a loss turns non-finite; carries the offending report.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, const LossReport<float>& report)
      : std::runtime_error(what), report_(report) {}
  const LossReport<float>& report() const { return report_; }

 private:
  LossReport<float> report_;
};

/// Full optimization state: both networks, Adam moments, iteration counter
/// and RNG stream. Round-trips through Checkpoint bitwise, so a resumed run
/// reproduces the exact loss sequence of an uninterrupted one.
class TrainState {
 public:
  explicit TrainState(const TrainConfig& cfg);

  Generator<float>& generator() { return gen_; }
  const Generator<float>& generator() const { return gen_; }
  Discriminator<float>& discriminator() { return disc_; }

  long iteration() const { return iteration_; }
  std::mt19937_64& rng() { return rng_; }

  Checkpoint to_checkpoint(const TrainConfig& cfg) const;
  static TrainState from_checkpoint(const Checkpoint& ckpt, const TrainConfig& cfg);

  /// One discriminator update followed by one generator update on a random
  /// tile of the photo, re-rendering the predicted maps under the canonical
  /// scene. Returns the per-term report.
  LossReport<float> train_step(const LdrImage<float>& photo, const GuessedDiffuse<float>& guessed,
                               const TrainConfig& cfg, const FeatureExtractor<float>* fx);

 private:
  struct ParamSlot {
    std::string name;
    float* value = nullptr;
    float* grad = nullptr;
    Eigen::Index count = 0;
    ArrayX<float> m, v;
  };

  void collect_params();
  static void adam_update(std::vector<ParamSlot>& slots, float lr, float b1, float b2, long t);

  Generator<float> gen_;
  Discriminator<float> disc_;
  std::vector<ParamSlot> gen_params_, disc_params_;
  long gen_updates_ = 0;
  long disc_updates_ = 0;
  long iteration_ = 0;
  std::mt19937_64 rng_;
};

struct TrainRun {
  SvbrdfMaps<float> maps;
  Checkpoint checkpoint;
  std::vector<LossReport<float>> curve;
};

/// Loads the configured feature extractor; a missing or unreadable weights
/// file downgrades lambda_perceptual to 0 with a warning on stderr.
FeatureExtractor<float> load_feature_extractor_or_downgrade(TrainConfig& cfg);

/// Runs `iters` steps from a fresh seed or from `init` (whose fingerprint
/// must match), then evaluates the generator on the largest centered
/// power-of-two crop of the photo. iters = 0 is the pure inference path.
TrainRun run_training(const LdrImage<float>& photo, const TrainConfig& cfg, const Checkpoint* init,
                      int iters, const std::string& loss_csv_path = "");

/// Stage 1: pretrain on one arbitrary image and write the checkpoint.
Checkpoint pretrain(const LdrImage<float>& photo, const TrainConfig& cfg,
                    const std::string& checkpoint_path, const std::string& loss_csv_path = "");

/// Stage 2: fine-tune a pretrained checkpoint on a new input.
TrainRun finetune(const Checkpoint& ckpt, const LdrImage<float>& photo, const TrainConfig& cfg,
                  const std::string& loss_csv_path = "");

void write_loss_csv(const std::string& path, const std::vector<LossReport<float>>& curve);

/// Largest centered power-of-two (>= 64) crop usable by the generator.
LdrImage<float> center_crop_pow2(const LdrImage<float>& photo);

}  // namespace forge
