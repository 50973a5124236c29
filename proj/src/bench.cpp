#include "forge/bench.hpp"

#include "forge/image_io.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace forge {

void MaterialSpec::validate() const {
  if (side < 8) throw std::invalid_argument("MaterialSpec: side too small");
  if (period < 4 || period % 2 != 0)
    throw std::invalid_argument("MaterialSpec: period must be even and >= 4");
  if (side % period != 0)
    throw std::invalid_argument("MaterialSpec: period must divide the image side");
}

MaterialSpec::Pattern MaterialSpec::pattern_from_string(const std::string& s) {
  if (s == "checker") return Pattern::Checker;
  if (s == "stripes") return Pattern::Stripes;
  if (s == "noise-tile") return Pattern::NoiseTile;
  if (s == "bricks") return Pattern::Bricks;
  throw std::invalid_argument("unknown pattern '" + s + "' (checker|stripes|noise-tile|bricks)");
}

namespace {

float lerp(float a, float b, float t) { return a + (b - a) * t; }

/// Periodic pattern field in [0,1]; `period` is the fundamental period so the
/// generated maps tile exactly.
struct PatternField {
  MaterialSpec::Pattern pattern;
  int period;
  ArrayXX<float> noise;  // period x period tile for NoiseTile

  float operator()(int y, int x) const {
    const int half = period / 2;
    switch (pattern) {
      case MaterialSpec::Pattern::Checker:
        return static_cast<float>(((x / half) + (y / half)) & 1);
      case MaterialSpec::Pattern::Stripes:
        return static_cast<float>((x / half) & 1);
      case MaterialSpec::Pattern::NoiseTile:
        return noise(y % period, x % period);
      case MaterialSpec::Pattern::Bricks: {
        const int row = y / half;
        const int shift = (row & 1) ? half : 0;
        const int ly = y % half;
        const int lx = (x + shift) % period;
        const int mortar = std::max(1, period / 16);
        return (ly < mortar || lx < mortar) ? 1.0f : 0.0f;
      }
    }
    return 0.0f;
  }
};

PatternField make_field(const MaterialSpec& spec, std::mt19937_64& rng) {
  PatternField f;
  f.pattern = spec.pattern;
  f.period = spec.period;
  if (spec.pattern == MaterialSpec::Pattern::NoiseTile) {
    f.noise = ArrayXX<float>(spec.period, spec.period);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int y = 0; y < spec.period; ++y)
      for (int x = 0; x < spec.period; ++x) f.noise(y, x) = static_cast<float>(uni(rng));
  }
  return f;
}

}  // namespace

SvbrdfMaps<float> synth_material(const MaterialSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  // Independent pattern instances per map for the noise pattern; the
  // two-level patterns are deterministic so they share the field.
  const PatternField f_diffuse = make_field(spec, rng);
  const PatternField f_specular = make_field(spec, rng);
  const PatternField f_roughness = make_field(spec, rng);

  const int n = spec.side;
  SvbrdfMaps<float> maps;
  maps.diffuse = Tensor<float>(3, n, n);
  maps.specular = Tensor<float>(1, n, n);
  maps.roughness = Tensor<float>(1, n, n);
  maps.normal = Tensor<float>(3, n, n);

  const float two_pi = 2.0f * static_cast<float>(std::numbers::pi);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const float td = f_diffuse(y, x);
      for (int c = 0; c < 3; ++c)
        maps.diffuse(c, y, x) = lerp(spec.diffuse_a[c], spec.diffuse_b[c], td);
      maps.specular(0, y, x) = lerp(spec.specular_lo, spec.specular_hi, f_specular(y, x));
      maps.roughness(0, y, x) =
          std::max(float(kAlphaMin), lerp(spec.roughness_lo, spec.roughness_hi, f_roughness(y, x)));
      // Sinusoidal emboss at the pattern period keeps normals stationary.
      const Vec3<float> raw(spec.normal_amplitude * std::sin(two_pi * x / spec.period),
                            spec.normal_amplitude * std::sin(two_pi * y / spec.period), 1.0f);
      maps.normal.set_pixel3(y, x, raw.normalized());
    }
  maps.validate();
  return maps;
}

LdrImage<float> render_input(const SvbrdfMaps<float>& maps, const SceneConfig<float>& scene,
                             bool overexpose) {
  LinearImage<float> lin = render(maps, scene);
  if (overexpose) lin.rgb.vec() *= 2.0f;
  return tonemap(lin, static_cast<float>(kGamma));
}

float spot_ratio(const Tensor<float>& map) {
  const Tensor<float> lum = map.channels() == 1 ? map : luminance(map);
  const int h = lum.rows(), w = lum.cols();
  const float cy = (h - 1) / 2.0f, cx = (w - 1) / 2.0f;
  const float disk_r = h / 8.0f, ring_lo = 3.0f * h / 8.0f, ring_hi = h / 2.0f;
  double disk_sum = 0, ring_sum = 0;
  long disk_n = 0, ring_n = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float r = std::hypot(y - cy, x - cx);
      if (r <= disk_r) {
        disk_sum += lum(0, y, x);
        ++disk_n;
      } else if (r >= ring_lo && r <= ring_hi) {
        ring_sum += lum(0, y, x);
        ++ring_n;
      }
    }
  const double disk_mean = disk_n ? disk_sum / disk_n : 0.0;
  const double ring_mean = ring_n ? ring_sum / ring_n : 0.0;
  return static_cast<float>(disk_mean / std::max(ring_mean, 1e-9));
}

std::string EvalReport::csv_header() {
  return "label,rmse_diffuse,rmse_specular,rmse_roughness,rmse_normal_deg,rerender_l1,"
         "spot_diffuse,spot_specular,spot_roughness,spot_normal,runtime_seconds";
}

std::string EvalReport::csv_row(const std::string& label) const {
  std::ostringstream ss;
  ss << label << ',' << rmse_diffuse << ',' << rmse_specular << ',' << rmse_roughness << ','
     << rmse_normal_deg << ',' << rerender_l1 << ',' << spot_diffuse << ',' << spot_specular << ','
     << spot_roughness << ',' << spot_normal << ',' << runtime_seconds;
  return ss.str();
}

namespace {

float rmse(const Tensor<float>& a, const Tensor<float>& b) {
  return std::sqrt((a.vec() - b.vec()).square().mean());
}

Tensor<float> center_crop(const Tensor<float>& t, int side) {
  const int oy = (t.rows() - side) / 2, ox = (t.cols() - side) / 2;
  Tensor<float> out(t.channels(), side, side);
  for (int c = 0; c < t.channels(); ++c)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) out(c, y, x) = t(c, oy + y, ox + x);
  return out;
}

Tensor<float> encode_normal(const Tensor<float>& n) {
  Tensor<float> enc(3, n.rows(), n.cols());
  enc.vec() = n.vec() * 0.5f + 0.5f;
  return enc;
}

}  // namespace

EvalReport evaluate(const SvbrdfMaps<float>& recovered, const SvbrdfMaps<float>& reference,
                    const LdrImage<float>& input_photo) {
  if (recovered.rows() != reference.rows() || recovered.cols() != reference.cols())
    throw std::invalid_argument("evaluate: map resolutions differ");
  EvalReport r;
  r.rmse_diffuse = rmse(recovered.diffuse, reference.diffuse);
  r.rmse_specular = rmse(recovered.specular, reference.specular);
  r.rmse_roughness = rmse(recovered.roughness, reference.roughness);

  double sq_deg = 0;
  for (int y = 0; y < recovered.rows(); ++y)
    for (int x = 0; x < recovered.cols(); ++x) {
      const Vec3<float> a = recovered.normal.pixel3(y, x), b = reference.normal.pixel3(y, x);
      // atan2 form is exact at 0 and stable near parallel vectors.
      const double deg = std::atan2(a.cross(b).norm(), a.dot(b)) * 180.0 / std::numbers::pi;
      sq_deg += deg * deg;
    }
  r.rmse_normal_deg =
      static_cast<float>(std::sqrt(sq_deg / (double(recovered.rows()) * recovered.cols())));

  const LdrImage<float> rerender =
      tonemap(render(recovered, SceneConfig<float>::canonical()), static_cast<float>(kGamma));
  Tensor<float> photo_crop = input_photo.rgb;
  if (input_photo.rows() != recovered.rows() || input_photo.cols() != recovered.cols())
    photo_crop = center_crop(input_photo.rgb, recovered.rows());
  r.rerender_l1 = (rerender.rgb.vec() - photo_crop.vec()).abs().mean();

  r.spot_diffuse = spot_ratio(recovered.diffuse);
  r.spot_specular = spot_ratio(recovered.specular);
  r.spot_roughness = spot_ratio(recovered.roughness);
  r.spot_normal = spot_ratio(encode_normal(recovered.normal));
  return r;
}

std::vector<AblationRow> run_ablation(const LdrImage<float>& photo, const TrainConfig& cfg,
                                      const Checkpoint* init, const SvbrdfMaps<float>* reference,
                                      const std::string& out_dir) {
  struct Variant {
    std::string name;
    float lambda_fourier;
    float lambda_perceptual;
    FourierFlags flags;
  };
  FourierFlags all, no_rough, no_spec;
  no_rough.on_roughness = false;
  no_spec.on_specular = false;
  const std::vector<Variant> variants = {
      {"adv_only", 0.0f, 0.0f, all},
      {"fourier", cfg.weights.lambda_fourier, 0.0f, all},
      {"fourier_perceptual", cfg.weights.lambda_fourier, cfg.weights.lambda_perceptual, all},
      {"fourier_no_roughness", cfg.weights.lambda_fourier, cfg.weights.lambda_perceptual, no_rough},
      {"fourier_no_specular", cfg.weights.lambda_fourier, cfg.weights.lambda_perceptual, no_spec},
  };

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path base(out_dir);

  std::vector<AblationRow> rows;
  std::vector<SvbrdfMaps<float>> recovered;
  for (const Variant& v : variants) {
    TrainConfig vc = cfg;
    vc.weights.lambda_fourier = v.lambda_fourier;
    vc.weights.lambda_perceptual = v.lambda_perceptual;
    vc.fourier = v.flags;
    const int iters = init ? cfg.finetune_iters : cfg.scratch_iters;

    const auto t0 = std::chrono::steady_clock::now();
    TrainRun run = run_training(photo, vc, init, iters);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    EvalReport rep;
    if (reference) {
      rep = evaluate(run.maps, *reference, photo);
    } else {
      rep.rerender_l1 =
          (tonemap(render(run.maps, SceneConfig<float>::canonical()), float(kGamma)).rgb.vec() -
           center_crop(photo.rgb, run.maps.rows()).vec())
              .abs()
              .mean();
      rep.spot_diffuse = spot_ratio(run.maps.diffuse);
      rep.spot_specular = spot_ratio(run.maps.specular);
      rep.spot_roughness = spot_ratio(run.maps.roughness);
      rep.spot_normal = spot_ratio(encode_normal(run.maps.normal));
    }
    rep.runtime_seconds = secs;
    save_maps((base / v.name).string(), run.maps);
    rows.push_back({v.name, rep});
    recovered.push_back(std::move(run.maps));
  }

  {
    std::ofstream os(base / "ablation.csv");
    os << EvalReport::csv_header() << '\n';
    for (const auto& row : rows) os << row.report.csv_row(row.name) << '\n';
  }

  // Grid: one row per variant, panels = diffuse, specular, roughness,
  // normal, input, re-render.
  const int side = recovered.front().rows();
  Tensor<float> grid(3, side * static_cast<int>(variants.size()), side * 6);
  const Tensor<float> input_panel = center_crop(photo.rgb, side);
  for (size_t i = 0; i < recovered.size(); ++i) {
    const SvbrdfMaps<float>& m = recovered[i];
    const LdrImage<float> rr =
        tonemap(render(m, SceneConfig<float>::canonical()), static_cast<float>(kGamma));
    const Tensor<float>* panels3[6];
    Tensor<float> spec3(3, side, side), rough3(3, side, side);
    for (int c = 0; c < 3; ++c) {
      spec3.plane(c) = m.specular.plane(0);
      rough3.plane(c) = m.roughness.plane(0);
    }
    const Tensor<float> enc = encode_normal(m.normal);
    panels3[0] = &m.diffuse;
    panels3[1] = &spec3;
    panels3[2] = &rough3;
    panels3[3] = &enc;
    panels3[4] = &input_panel;
    panels3[5] = &rr.rgb;
    for (int p = 0; p < 6; ++p)
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < side; ++y)
          for (int x = 0; x < side; ++x)
            grid(c, static_cast<int>(i) * side + y, p * side + x) = (*panels3[p])(c, y, x);
  }
  write_png((base / "grid.png").string(), grid, 8);
  return rows;
}

TrainConfig desk_scale_defaults() {
  TrainConfig cfg;
  cfg.tile_size = 128;
  cfg.pretrain_iters = 2000;
  cfg.finetune_iters = 500;
  cfg.scratch_iters = 3000;
  cfg.base_channels = 16;
  cfg.learning_rate = 2e-4f;
  return cfg;
}

}  // namespace forge
