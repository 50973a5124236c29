#pragma once

#include "forge/image.hpp"
#include "forge/material.hpp"
#include "forge/trainer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace forge {

/// Synthetic stationary material: a periodic base pattern whose period
/// divides the image side, with per-map value ranges and a seeded RNG for the
/// noise-tile pattern.
struct MaterialSpec {
  enum class Pattern { Checker, Stripes, NoiseTile, Bricks };

  Pattern pattern = Pattern::Checker;
  int side = 128;
  int period = 32;
  uint64_t seed = 0;

  Vec3<float> diffuse_a{0.62f, 0.40f, 0.22f};
  Vec3<float> diffuse_b{0.28f, 0.33f, 0.42f};
  float specular_lo = 0.03f;
  float specular_hi = 0.09f;
  float roughness_lo = 0.35f;
  float roughness_hi = 0.65f;
  float normal_amplitude = 0.25f;

  void validate() const;
  static Pattern pattern_from_string(const std::string& s);
};

SvbrdfMaps<float> synth_material(const MaterialSpec& spec);

/// Renders the synthetic input photo: colocated render, an optional 2x
/// intensity boost that forces the highlight core past 1.0 (the overexposed
/// capture of a glossy sample), then the display tonemap.
LdrImage<float> render_input(const SvbrdfMaps<float>& maps, const SceneConfig<float>& scene,
                             bool overexpose);

/// Center-disk (radius H/8) over outer-ring ([3H/8, H/2]) mean luminance.
/// Close to 1 for stationary maps, above 1 when a residual highlight sits in
/// the map.
float spot_ratio(const Tensor<float>& map);

struct EvalReport {
  float rmse_diffuse = 0;
  float rmse_specular = 0;
  float rmse_roughness = 0;
  float rmse_normal_deg = 0;
  float rerender_l1 = 0;
  float spot_diffuse = 0;
  float spot_specular = 0;
  float spot_roughness = 0;
  float spot_normal = 0;
  double runtime_seconds = 0;

  static std::string csv_header();
  std::string csv_row(const std::string& label) const;
};

/// RMSE per map (normals as angular error in degrees), re-render L1 against
/// the input photo, and the per-map spot ratios of the recovered maps.
EvalReport evaluate(const SvbrdfMaps<float>& recovered, const SvbrdfMaps<float>& reference,
                    const LdrImage<float>& input_photo);

struct AblationRow {
  std::string name;
  EvalReport report;
};

/// Runs recover under the loss variants of the ablation study (adversarial +
/// diffuse only, +Fourier, +Fourier+perceptual, and the per-map Fourier
/// toggles), all from the same seed/checkpoint. Writes ablation.csv and a
/// side-by-side grid image (one row per variant: 4 maps + input + re-render)
/// into out_dir; per-variant maps land in out_dir/<variant>/.
std::vector<AblationRow> run_ablation(const LdrImage<float>& photo, const TrainConfig& cfg,
                                      const Checkpoint* init, const SvbrdfMaps<float>* reference,
                                      const std::string& out_dir);

/// Desk-scale profile: small enough that the full benchmark suite runs in CPU
/// hours instead of GPU days. Paper-scale settings stay on TrainConfig's
/// defaults (--paper-scale in the CLI).
TrainConfig desk_scale_defaults();

}  // namespace forge
