#include "forge/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace forge {

void TrainConfig::validate() const {
  weights.validate();
  if (!(learning_rate > 0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (pretrain_iters <= 0 || finetune_iters <= 0 || scratch_iters <= 0)
    throw std::invalid_argument("TrainConfig: iteration counts must be > 0");
  if (!is_power_of_two(tile_size) || tile_size < 64)
    throw std::invalid_argument("TrainConfig: tile_size must be a power of two >= 64");
  if (disc_steps < 1) throw std::invalid_argument("TrainConfig: disc_steps must be >= 1");
  if (base_channels < 4) throw std::invalid_argument("TrainConfig: base_channels must be >= 4");
}

uint64_t TrainConfig::fingerprint() const {
  std::ostringstream ss;
  ss << "svbrdf-forge/1|unet5+patch70|tile=" << tile_size << "|base=" << base_channels
     << "|alpha_min=" << kAlphaMin << "|gamma=" << kGamma;
  return fnv1a64(ss.str());
}

void TrainConfig::apply(const ConfigFile& file) {
  learning_rate = static_cast<float>(file.get_double("learning_rate", learning_rate));
  pretrain_iters = static_cast<int>(file.get_int("pretrain_iters", pretrain_iters));
  finetune_iters = static_cast<int>(file.get_int("finetune_iters", finetune_iters));
  scratch_iters = static_cast<int>(file.get_int("scratch_iters", scratch_iters));
  tile_size = static_cast<int>(file.get_int("tile_size", tile_size));
  seed = static_cast<uint64_t>(file.get_int("seed", static_cast<long>(seed)));
  weights.lambda_gan = static_cast<float>(file.get_double("lambda_gan", weights.lambda_gan));
  weights.lambda_fourier =
      static_cast<float>(file.get_double("lambda_fourier", weights.lambda_fourier));
  weights.lambda_perceptual =
      static_cast<float>(file.get_double("lambda_perceptual", weights.lambda_perceptual));
  adam_beta1 = static_cast<float>(file.get_double("adam_beta1", adam_beta1));
  adam_beta2 = static_cast<float>(file.get_double("adam_beta2", adam_beta2));
  augment = file.get_bool("augment", augment);
  disc_steps = static_cast<int>(file.get_int("disc_steps", disc_steps));
  base_channels = static_cast<int>(file.get_int("base_channels", base_channels));
  fourier.on_diffuse = file.get_bool("fourier.diffuse", fourier.on_diffuse);
  fourier.on_specular = file.get_bool("fourier.specular", fourier.on_specular);
  fourier.on_roughness = file.get_bool("fourier.roughness", fourier.on_roughness);
  fourier.on_normal = file.get_bool("fourier.normal", fourier.on_normal);
  fourier.complex_difference = file.get_bool("fourier.complex", fourier.complex_difference);
  perceptual_weights_path = file.get_string("perceptual.weights_path", perceptual_weights_path);
}

// ---------------------------------------------------------------------------
// Tile sampling.

Crop sample_crop(int photo_h, int photo_w, int tile, std::mt19937_64& rng, bool augment) {
  if (photo_h < tile || photo_w < tile)
    throw std::invalid_argument("sample_crop: photo smaller than tile");
  Crop c;
  c.oy = photo_h == tile ? 0 : static_cast<int>(rng() % static_cast<uint64_t>(photo_h - tile + 1));
  c.ox = photo_w == tile ? 0 : static_cast<int>(rng() % static_cast<uint64_t>(photo_w - tile + 1));
  if (augment) {
    c.rot = static_cast<int>(rng() % 4);
    c.flip = (rng() & 1) != 0;
  }
  return c;
}

Tensor<float> apply_crop(const Tensor<float>& src, const Crop& crop, int tile) {
  Tensor<float> out(src.channels(), tile, tile);
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < tile; ++y)
      for (int x = 0; x < tile; ++x) {
        int sy = y, sx = x;
        if (crop.flip) sx = tile - 1 - sx;
        for (int r = 0; r < crop.rot; ++r) {
          const int t = sy;
          sy = tile - 1 - sx;  // inverse quarter turn
          sx = t;
        }
        out(c, y, x) = src(c, crop.oy + sy, crop.ox + sx);
      }
  return out;
}

LdrImage<float> sample_tile(const LdrImage<float>& photo, int tile, std::mt19937_64& rng,
                            bool augment, Crop* out_crop) {
  const Crop c = sample_crop(photo.rows(), photo.cols(), tile, rng, augment);
  if (out_crop) *out_crop = c;
  return LdrImage<float>{apply_crop(photo.rgb, c, tile)};
}

// ---------------------------------------------------------------------------
// TrainState.

TrainState::TrainState(const TrainConfig& cfg)
    : gen_(cfg.base_channels), disc_(cfg.base_channels), rng_(cfg.seed) {
  std::mt19937_64 init_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  gen_.init(init_rng);
  disc_.init(init_rng);
  collect_params();
}

void TrainState::collect_params() {
  gen_params_.clear();
  disc_params_.clear();
  auto add_to = [](std::vector<ParamSlot>& slots) {
    return [&slots](const std::string& name, float* value, float* grad, Eigen::Index count) {
      ParamSlot s;
      s.name = name;
      s.value = value;
      s.grad = grad;
      s.count = count;
      s.m = ArrayX<float>::Zero(count);
      s.v = ArrayX<float>::Zero(count);
      slots.push_back(std::move(s));
    };
  };
  gen_.visit_params(add_to(gen_params_));
  disc_.visit_params(add_to(disc_params_));
}

void TrainState::adam_update(std::vector<ParamSlot>& slots, float lr, float b1, float b2, long t) {
  const float eps = 1e-8f;
  const float bc1 = 1.0f - std::pow(b1, static_cast<float>(t));
  const float bc2 = 1.0f - std::pow(b2, static_cast<float>(t));
  for (ParamSlot& s : slots) {
    Eigen::Map<ArrayX<float>> w(s.value, s.count), g(s.grad, s.count);
    s.m = b1 * s.m + (1.0f - b1) * g;
    s.v = b2 * s.v + (1.0f - b2) * g.square();
    w -= lr * (s.m / bc1) / ((s.v / bc2).sqrt() + eps);
  }
}

Checkpoint TrainState::to_checkpoint(const TrainConfig& cfg) const {
  Checkpoint c;
  c.fingerprint = cfg.fingerprint();
  c.put_u64("meta.iteration", static_cast<uint64_t>(iteration_));
  c.put_u64("meta.gen_updates", static_cast<uint64_t>(gen_updates_));
  c.put_u64("meta.disc_updates", static_cast<uint64_t>(disc_updates_));
  std::ostringstream rs;
  rs << rng_;
  c.put_bytes("meta.rng", rs.str());
  for (const auto* slots : {&gen_params_, &disc_params_})
    for (const ParamSlot& s : *slots) {
      c.put_floats(s.name, s.value, static_cast<size_t>(s.count));
      c.put_floats(s.name + ".adam_m", s.m.data(), static_cast<size_t>(s.count));
      c.put_floats(s.name + ".adam_v", s.v.data(), static_cast<size_t>(s.count));
    }
  return c;
}

TrainState TrainState::from_checkpoint(const Checkpoint& ckpt, const TrainConfig& cfg) {
  if (ckpt.fingerprint != cfg.fingerprint())
    throw std::runtime_error(
        "checkpoint fingerprint " + std::to_string(ckpt.fingerprint) +
        " does not match config fingerprint " + std::to_string(cfg.fingerprint()) +
        " (tile size or architecture differ)");
  TrainState st(cfg);
  st.iteration_ = static_cast<long>(ckpt.get_u64("meta.iteration"));
  st.gen_updates_ = static_cast<long>(ckpt.get_u64("meta.gen_updates"));
  st.disc_updates_ = static_cast<long>(ckpt.get_u64("meta.disc_updates"));
  std::istringstream rs(ckpt.get_bytes("meta.rng"));
  rs >> st.rng_;
  if (!rs) throw std::runtime_error("checkpoint: bad RNG state");
  for (auto* slots : {&st.gen_params_, &st.disc_params_})
    for (ParamSlot& s : *slots) {
      ckpt.get_floats(s.name, s.value, static_cast<size_t>(s.count));
      ckpt.get_floats(s.name + ".adam_m", s.m.data(), static_cast<size_t>(s.count));
      ckpt.get_floats(s.name + ".adam_v", s.v.data(), static_cast<size_t>(s.count));
    }
  return st;
}

LossReport<float> TrainState::train_step(const LdrImage<float>& photo,
                                         const GuessedDiffuse<float>& guessed,
                                         const TrainConfig& cfg,
                                         const FeatureExtractor<float>* fx) {
  const auto scene = SceneConfig<float>::canonical();
  const float gamma = static_cast<float>(kGamma);

  Crop crop = sample_crop(photo.rows(), photo.cols(), cfg.tile_size, rng_, cfg.augment);
  const Tensor<float> tile = apply_crop(photo.rgb, crop, cfg.tile_size);
  const Tensor<float> gtile = apply_crop(guessed.map, crop, cfg.tile_size);

  typename Generator<float>::Cache gcache;
  SvbrdfMaps<float> maps = gen_.forward(tile, gcache);
  LinearImage<float> lin = render(maps, scene);
  LdrImage<float> rerender = tonemap(lin, gamma);

  // Discriminator update(s): real = input tile, fake = detached re-render.
  LossReport<float> report;
  for (int s = 0; s < cfg.disc_steps; ++s) {
    typename Discriminator<float>::Cache dc_real, dc_fake;
    const Tensor<float> logits_real = disc_.forward(tile, dc_real);
    const Tensor<float> logits_fake = disc_.forward(rerender.rgb, dc_fake);
    const auto adv = adversarial_losses(logits_real, logits_fake);
    report.adversarial_d = adv.d_loss;
    auto [d_real, d_fake] = adversarial_d_backward(logits_real, logits_fake);
    disc_.zero_grad();
    disc_.backward(d_fake, dc_fake, /*need_dx=*/false);
    disc_.backward(d_real, dc_real, /*need_dx=*/false);
    adam_update(disc_params_, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, ++disc_updates_);
  }

  // Generator update against the refreshed discriminator.
  typename Discriminator<float>::Cache dc_g;
  const Tensor<float> logits_g = disc_.forward(rerender.rgb, dc_g);
  {
    ArrayX<float> p = (1.0f / (1.0f + (-logits_g.vec()).exp())).eval();
    report.adversarial_g = -p.max(float(kLogitEps)).log().mean();
  }
  disc_.zero_grad();  // input gradient only; weight grads from this pass are discarded
  Tensor<float> d_rerender = disc_.backward(adversarial_g_backward(logits_g), dc_g, true);
  d_rerender.vec() *= cfg.weights.lambda_gan;

  report.diffuse = diffuse_loss(maps.diffuse, gtile);
  Tensor<float> d_diffuse_direct = diffuse_loss_backward(maps.diffuse, gtile);

  const FourierReference<float> fref = make_fourier_reference(gtile);
  MapsGrad<float> fourier_grad;
  report.fourier = fourier_loss(maps, fref, cfg.fourier, &fourier_grad);

  if (fx && !fx->empty() && cfg.weights.lambda_perceptual > 0) {
    Tensor<float> d_rerender_p;
    report.perceptual =
        perceptual_loss(LdrImage<float>{tile}, rerender, *fx, &d_rerender_p);
    d_rerender.vec() += cfg.weights.lambda_perceptual * d_rerender_p.vec();
  }

  const Tensor<float> d_lin = tonemap_backward(lin, gamma, d_rerender);
  MapsGrad<float> grad = render_backward(maps, scene, d_lin);
  grad.diffuse.vec() += d_diffuse_direct.vec();
  grad.add_scaled(fourier_grad, cfg.weights.lambda_fourier);

  gen_.zero_grad();
  gen_.backward(grad, gcache);
  adam_update(gen_params_, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, ++gen_updates_);
  disc_.zero_grad();

  ++iteration_;
  report = total_generator_loss(report.diffuse, report.adversarial_g, report.adversarial_d,
                                report.fourier, report.perceptual, cfg.weights);
  if (!report.finite())
    throw TrainingError("non-finite loss at iteration " + std::to_string(iteration_), report);
  return report;
}

// ---------------------------------------------------------------------------
// Driver functions.

FeatureExtractor<float> load_feature_extractor_or_downgrade(TrainConfig& cfg) {
  if (cfg.weights.lambda_perceptual <= 0) return {};
  if (cfg.perceptual_weights_path.empty()) {
    std::cerr << "warning: no perceptual weights configured; running with lambda_perceptual = 0\n";
    cfg.weights.lambda_perceptual = 0;
    return {};
  }
  try {
    return FeatureExtractor<float>::load(cfg.perceptual_weights_path);
  } catch (const std::exception& e) {
    std::cerr << "warning: " << e.what() << "; running with lambda_perceptual = 0\n";
    cfg.weights.lambda_perceptual = 0;
    return {};
  }
}

LdrImage<float> center_crop_pow2(const LdrImage<float>& photo) {
  int side = 64;
  while (side * 2 <= std::min(photo.rows(), photo.cols())) side *= 2;
  if (side > std::min(photo.rows(), photo.cols()))
    throw std::invalid_argument("photo smaller than the minimum 64px tile");
  const int oy = (photo.rows() - side) / 2, ox = (photo.cols() - side) / 2;
  Tensor<float> out(3, side, side);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) out(c, y, x) = photo.rgb(c, oy + y, ox + x);
  return LdrImage<float>{std::move(out)};
}

void write_loss_csv(const std::string& path, const std::vector<LossReport<float>>& curve) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "iter,diffuse,adv_g,adv_d,fourier,perceptual,total\n";
  for (size_t i = 0; i < curve.size(); ++i) {
    const auto& r = curve[i];
    os << i << ',' << r.diffuse << ',' << r.adversarial_g << ',' << r.adversarial_d << ','
       << r.fourier << ',' << r.perceptual << ',' << r.total_generator << '\n';
  }
}

TrainRun run_training(const LdrImage<float>& photo, const TrainConfig& cfg_in,
                      const Checkpoint* init, int iters, const std::string& loss_csv_path) {
  TrainConfig cfg = cfg_in;
  cfg.validate();
  if (iters < 0) throw std::invalid_argument("run_training: negative iteration count");
  const FeatureExtractor<float> fx = load_feature_extractor_or_downgrade(cfg);

  TrainState state = init ? TrainState::from_checkpoint(*init, cfg) : TrainState(cfg);

  TrainRun run;
  if (iters > 0) {
    const GuessedDiffuse<float> guessed = guess_diffuse(photo);
    run.curve.reserve(static_cast<size_t>(iters));
    for (int i = 0; i < iters; ++i)
      run.curve.push_back(state.train_step(photo, guessed, cfg, &fx));
  }

  run.maps = state.generator().forward(center_crop_pow2(photo).rgb);
  run.checkpoint = state.to_checkpoint(cfg);
  if (!loss_csv_path.empty()) write_loss_csv(loss_csv_path, run.curve);
  return run;
}

Checkpoint pretrain(const LdrImage<float>& photo, const TrainConfig& cfg,
                    const std::string& checkpoint_path, const std::string& loss_csv_path) {
  TrainRun run = run_training(photo, cfg, nullptr, cfg.pretrain_iters,
                              loss_csv_path.empty() ? checkpoint_path + ".loss.csv"
                                                    : loss_csv_path);
  run.checkpoint.save(checkpoint_path);
  return std::move(run.checkpoint);
}

TrainRun finetune(const Checkpoint& ckpt, const LdrImage<float>& photo, const TrainConfig& cfg,
                  const std::string& loss_csv_path) {
  return run_training(photo, cfg, &ckpt, cfg.finetune_iters, loss_csv_path);
}

}  // namespace forge
