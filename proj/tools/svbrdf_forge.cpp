// svbrdf-forge: recover SVBRDF maps from a single flash photo of a flat
// stationary material, plus the synthetic benchmark around it.

#include "forge/bench.hpp"
#include "forge/image_io.hpp"
#include "forge/trainer.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {

using namespace forge;

/// Shared training options. Desk-scale defaults; --paper-scale restores the
/// published budgets (tile 256, 10k/3k/20k iterations, width 64).
struct TrainArgs {
  std::string config_path;
  bool paper_scale = false;
  long iters = -1;
  long seed = -1;
  long tile = -1;
  double lambda_gan = -1, lambda_fourier = -1, lambda_perceptual = -1;
  std::string fx_weights;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key=value config file (see docs/config.md)");
    cmd->add_flag("--paper-scale", paper_scale, "use the published training budgets");
    cmd->add_option("--iters", iters, "override the iteration budget for this run");
    cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_option("--tile", tile, "training tile side (power of two >= 64)");
    cmd->add_option("--lambda-gan", lambda_gan, "adversarial weight");
    cmd->add_option("--lambda-fourier", lambda_fourier, "Fourier stationarity weight");
    cmd->add_option("--lambda-perceptual", lambda_perceptual, "perceptual weight");
    cmd->add_option("--fx-weights", fx_weights, "feature extractor weights file");
  }

  TrainConfig build() const {
    TrainConfig cfg = paper_scale ? TrainConfig{} : desk_scale_defaults();
    if (const char* env = std::getenv("SVBRDF_FORGE_WEIGHTS"))
      cfg.perceptual_weights_path = env;
    if (!config_path.empty()) cfg.apply(ConfigFile::parse_file(config_path));
    if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
    if (tile > 0) cfg.tile_size = static_cast<int>(tile);
    if (lambda_gan >= 0) cfg.weights.lambda_gan = static_cast<float>(lambda_gan);
    if (lambda_fourier >= 0) cfg.weights.lambda_fourier = static_cast<float>(lambda_fourier);
    if (lambda_perceptual >= 0)
      cfg.weights.lambda_perceptual = static_cast<float>(lambda_perceptual);
    if (!fx_weights.empty()) cfg.perceptual_weights_path = fx_weights;
    cfg.validate();
    return cfg;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"svbrdf-forge: single-image SVBRDF recovery and benchmark"};
  app.require_subcommand(1);

  // --- synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic stationary material");
  std::string synth_pattern = "checker", synth_out;
  MaterialSpec spec;
  long synth_seed = 0;
  synth->add_option("--pattern", synth_pattern, "checker|stripes|noise-tile|bricks");
  synth->add_option("--side", spec.side, "image side in pixels");
  synth->add_option("--period", spec.period, "pattern period in pixels (divides side)");
  synth->add_option("--seed", synth_seed, "seed for the noise-tile pattern");
  synth->add_option("--out", synth_out, "output material directory")->required();
  synth->callback([&] {
    spec.pattern = MaterialSpec::pattern_from_string(synth_pattern);
    spec.seed = static_cast<uint64_t>(synth_seed);
    save_maps(synth_out, synth_material(spec));
    std::cout << "wrote material to " << synth_out << "\n";
  });

  // --- render --------------------------------------------------------------
  auto* rend = app.add_subcommand("render", "render the synthetic input photo for a material");
  std::string rend_maps, rend_out;
  bool rend_overexpose = false;
  double rend_height = 2.0, rend_extent = 1.0, rend_intensity = -1.0;
  rend->add_option("--maps", rend_maps, "material directory")->required();
  rend->add_option("--out", rend_out, "output PNG")->required();
  rend->add_flag("--overexpose", rend_overexpose, "2x intensity boost to clip the highlight");
  rend->add_option("--light-height", rend_height, "colocated light/camera height");
  rend->add_option("--extent", rend_extent, "plane half-width");
  rend->add_option("--intensity", rend_intensity, "light intensity (default: calibrated)");
  rend->callback([&] {
    SceneConfig<float> scene = SceneConfig<float>::canonical();
    scene.light_height = static_cast<float>(rend_height);
    scene.plane_extent = static_cast<float>(rend_extent);
    if (rend_intensity > 0) scene.light_intensity = static_cast<float>(rend_intensity);
    const LdrImage<float> img = render_input(load_maps(rend_maps), scene, rend_overexpose);
    write_png(rend_out, img.rgb, 8);
    std::cout << "wrote " << rend_out << "\n";
  });

  // --- guess ---------------------------------------------------------------
  auto* guess = app.add_subcommand("guess", "build the guessed diffuse map from a photo");
  std::string guess_in, guess_out;
  double guess_sigma = 0;
  guess->add_option("--in", guess_in, "input photo (8-bit sRGB PNG)")->required();
  guess->add_option("--out", guess_out, "output directory")->required();
  guess->add_option("--sigma", guess_sigma, "illumination blur sigma in pixels (default H/8)");
  guess->callback([&] {
    const LdrImage<float> photo = read_ldr_photo(guess_in);
    const GuessedDiffuse<float> g = guess_diffuse(photo, static_cast<float>(guess_sigma));
    std::filesystem::create_directories(guess_out);
    write_png((std::filesystem::path(guess_out) / "guessed_diffuse.png").string(), g.map, 16);
    std::cout << "stationarity_score " << g.score << "\n";
  });

  // --- pretrain ------------------------------------------------------------
  auto* pre = app.add_subcommand("pretrain", "stage 1: train on one image from scratch");
  std::string pre_in, pre_out;
  TrainArgs pre_args;
  pre->add_option("--in", pre_in, "input photo")->required();
  pre->add_option("--out", pre_out, "output checkpoint path")->required();
  pre_args.attach(pre);
  pre->callback([&] {
    TrainConfig cfg = pre_args.build();
    if (pre_args.iters >= 0) cfg.pretrain_iters = static_cast<int>(pre_args.iters);
    const LdrImage<float> photo = read_ldr_photo(pre_in);
    pretrain(photo, cfg, pre_out);
    std::cout << "wrote checkpoint " << pre_out << " (+ " << pre_out << ".loss.csv)\n";
  });

  // --- recover -------------------------------------------------------------
  auto* rec = app.add_subcommand("recover", "stage 2: recover maps for a new photo");
  std::string rec_in, rec_ckpt, rec_out;
  bool rec_scratch = false;
  TrainArgs rec_args;
  rec->add_option("--in", rec_in, "input photo")->required();
  rec->add_option("--ckpt", rec_ckpt, "pretrained checkpoint");
  rec->add_option("--out", rec_out, "output directory")->required();
  rec->add_flag("--from-scratch", rec_scratch, "train from scratch instead of fine-tuning");
  rec_args.attach(rec);
  rec->callback([&] {
    if (rec_ckpt.empty() && !rec_scratch)
      throw CLI::ValidationError("recover", "either --ckpt or --from-scratch is required");
    TrainConfig cfg = rec_args.build();
    const LdrImage<float> photo = read_ldr_photo(rec_in);
    std::filesystem::create_directories(rec_out);
    const std::filesystem::path base(rec_out);

    Checkpoint init;
    int iters = rec_scratch ? cfg.scratch_iters : cfg.finetune_iters;
    if (rec_args.iters >= 0) iters = static_cast<int>(rec_args.iters);
    if (!rec_ckpt.empty()) init = Checkpoint::load(rec_ckpt);
    TrainRun run = run_training(photo, cfg, rec_ckpt.empty() ? nullptr : &init, iters,
                                (base / "loss.csv").string());

    save_maps(rec_out, run.maps);
    run.checkpoint.save((base / "final.ckpt").string());
    const LdrImage<float> rr =
        tonemap(render(run.maps, SceneConfig<float>::canonical()), float(kGamma));
    write_png((base / "rerender.png").string(), rr.rgb, 8);
    std::cout << "wrote maps + rerender to " << rec_out << "\n";
  });

  // --- eval ----------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "compare recovered maps against a reference");
  std::string ev_rec, ev_ref, ev_input;
  ev->add_option("--rec", ev_rec, "recovered material directory")->required();
  ev->add_option("--ref", ev_ref, "reference material directory")->required();
  ev->add_option("--input", ev_input, "input photo (default: re-render of the reference)");
  ev->callback([&] {
    const SvbrdfMaps<float> recd = load_maps(ev_rec);
    const SvbrdfMaps<float> refd = load_maps(ev_ref);
    const LdrImage<float> input =
        ev_input.empty() ? render_input(refd, SceneConfig<float>::canonical(), false)
                         : read_ldr_photo(ev_input);
    const EvalReport rep = evaluate(recd, refd, input);
    std::cout << EvalReport::csv_header() << "\n" << rep.csv_row("eval") << "\n";
  });

  // --- ablate --------------------------------------------------------------
  auto* abl = app.add_subcommand("ablate", "run the loss-variant ablation on one photo");
  std::string abl_in, abl_ckpt, abl_ref, abl_out;
  TrainArgs abl_args;
  abl->add_option("--in", abl_in, "input photo")->required();
  abl->add_option("--ckpt", abl_ckpt, "pretrained checkpoint (else trains from scratch)");
  abl->add_option("--ref", abl_ref, "reference material directory (enables RMSE columns)");
  abl->add_option("--out", abl_out, "output directory")->required();
  abl_args.attach(abl);
  abl->callback([&] {
    TrainConfig cfg = abl_args.build();
    if (abl_args.iters >= 0) {
      cfg.finetune_iters = static_cast<int>(abl_args.iters);
      cfg.scratch_iters = static_cast<int>(abl_args.iters);
    }
    const LdrImage<float> photo = read_ldr_photo(abl_in);
    Checkpoint init;
    SvbrdfMaps<float> ref;
    const bool have_ckpt = !abl_ckpt.empty(), have_ref = !abl_ref.empty();
    if (have_ckpt) init = Checkpoint::load(abl_ckpt);
    if (have_ref) ref = load_maps(abl_ref);
    const auto rows = run_ablation(photo, cfg, have_ckpt ? &init : nullptr,
                                   have_ref ? &ref : nullptr, abl_out);
    std::cout << EvalReport::csv_header() << "\n";
    for (const auto& row : rows) std::cout << row.report.csv_row(row.name) << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
