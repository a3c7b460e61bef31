// fovholo command-line tool: hologram optimization, evaluation and inspection.
//
// Exit codes: 0 success, 2 configuration / input error, 3 numerical failure, 1 other.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fovholo/fovholo.hpp"

namespace {

using namespace fovholo;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::pair<double, double> parse_gaze(const std::string& text) {
  std::istringstream in(text);
  double x = 0.0, y = 0.0;
  char comma = 0;
  if (!(in >> x >> comma >> y) || comma != ',' || !(in >> std::ws).eof()) {
    throw ConfigError("--gaze-deg expects X,Y in degrees, got '" + text + "'");
  }
  return {x, y};
}

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) out.push_back(part);
    }
  }
  return out;
}

PhaseMask load_phase(const fs::path& path) {
  if (path.extension() == ".png") return read_phase_png(path);
  return PhaseMask(read_pfm(path));
}

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

// Flags shared by the subcommands that build a PSF.
struct PsfFlags {
  std::optional<double> sigma;
  std::string zernike;
  std::optional<double> pixel_arcmin;
  std::optional<std::size_t> size;

  void add(CLI::App* app, const std::string& prefix = "") {
    app->add_option("--" + prefix + "sigma", sigma, "Gaussian PSF standard deviation in image pixels");
    app->add_option("--" + prefix + "zernike", zernike, "Zernike coefficient CSV (n,m,coeff_um or j,coeff_um)")
        ->check(CLI::ExistingFile);
    app->add_option("--" + prefix + "pixel-arcmin", pixel_arcmin, "Retinal angle of one image pixel (zernike)");
    app->add_option("--" + prefix + "psf-size", size, "Zernike kernel side in pixels (odd)");
  }

  bool set() const { return sigma.has_value() || !zernike.empty(); }

  void apply(PsfConfig& c) const {
    if (sigma && !zernike.empty()) throw ConfigError("give either a Gaussian sigma or a Zernike file, not both");
    if (sigma) {
      c.type = "gaussian";
      c.sigma = *sigma;
    }
    if (!zernike.empty()) {
      c.type = "zernike";
      c.file = zernike;
    }
    if (pixel_arcmin) c.zernike.pixel_arcmin = *pixel_arcmin;
    if (size) c.size = *size;
  }
};

// ---------------------------------------------------------------------------

struct OptimizeFlags {
  std::string config;
  std::vector<std::string> targets;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> workers;
  std::optional<double> fov;
  std::string gaze;
  std::vector<std::string> conditions;
  PsfFlags psf;
  PsfFlags eval_psf;
  std::optional<int> bits;
  std::optional<std::size_t> iterations;
  std::optional<double> step;
  std::optional<std::size_t> resolution;
  std::string error_domain;
  bool intensity_psf = false;
  bool no_srgb = false;
  bool evaluate = false;
};

ExperimentConfig build_config(const OptimizeFlags& f) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (!f.targets.empty()) {
    c.targets.clear();
    for (const auto& t : f.targets) c.targets.emplace_back(t);
  }
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.out = f.out;
  if (f.workers) c.workers = *f.workers;
  if (f.fov) c.fov_deg = *f.fov;
  if (!f.gaze.empty()) std::tie(c.gaze_x, c.gaze_y) = parse_gaze(f.gaze);
  if (!f.conditions.empty()) {
    c.conditions.clear();
    for (const auto& name : split_list(f.conditions)) c.conditions.push_back(parse_condition(name));
  }
  f.psf.apply(c.psf);
  if (f.eval_psf.set()) {
    PsfConfig e = c.evaluation_psf();
    f.eval_psf.apply(e);
    c.eval_psf = e;
  }
  if (f.bits) c.optimizer.quantize_bits = *f.bits;
  if (f.iterations) c.optimizer.iterations = *f.iterations;
  if (f.step) c.optimizer.step_size = *f.step;
  if (f.resolution) c.resolution = *f.resolution;
  if (!f.error_domain.empty()) c.error_domain = parse_error_domain(f.error_domain);
  if (f.intensity_psf) c.intensity_psf = true;
  if (f.no_srgb) c.srgb_decode = false;
  c.validate();
  return c;
}

void print_report(const MetricsReport& report) {
  std::printf("%-16s %6s %10s %8s %12s %10s\n", "condition", "images", "PSNR(dB)", "SSIM", "norm. MSE",
              "fov/peri");
  for (const auto& s : report.summary) {
    std::printf("%-16s %6zu %10.2f %8.4f %12.4f %10.3f\n", s.condition.c_str(), s.images, s.retinal.psnr,
                s.retinal.ssim, s.normalized_retinal,
                s.retinal.peripheral_mse > 0 ? s.retinal.foveal_mse / s.retinal.peripheral_mse : 0.0);
  }
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"Retina-aware phase-only hologram synthesis"};
  app.require_subcommand(1);

  // optimize
  OptimizeFlags opt;
  auto add_common = [](CLI::App* sub, OptimizeFlags& f) {
    sub->add_option("--config", f.config, "Experiment JSON; flags override its keys")->check(CLI::ExistingFile);
    sub->add_option("--target", f.targets, "Target PNG (repeatable; replaces the config list)");
    sub->add_option("--seed", f.seed, "Base random seed");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--workers", f.workers, "Concurrent jobs (0 = all cores)");
    sub->add_option("--fov-deg", f.fov, "Horizontal field of view in degrees");
    sub->add_option("--gaze-deg", f.gaze, "Gaze X,Y in degrees from the image centre (+y down)");
    sub->add_option("--condition", f.conditions, "Conditions to run (comma list or repeatable)");
    f.psf.add(sub);
    f.eval_psf.add(sub, "eval-");
    sub->add_option("--bits", f.bits, "Quantize the phase to this bit depth inside the loop");
    sub->add_option("--iterations", f.iterations, "Optimizer iterations");
    sub->add_option("--step-size", f.step, "Optimizer step size");
    sub->add_option("--resolution", f.resolution, "Resize targets to N x N (0 keeps native size)");
    sub->add_option("--error-domain", f.error_domain, "intensity or amplitude");
    sub->add_flag("--intensity-psf", f.intensity_psf, "Blur intensity instead of the complex field (ablation)");
    sub->add_flag("--no-srgb-decode", f.no_srgb, "Treat PNG values as linear");
  };
  CLI::App* optimize_cmd = app.add_subcommand("optimize", "Optimize holograms for every (image, condition)");
  add_common(optimize_cmd, opt);
  optimize_cmd->add_flag("--evaluate", opt.evaluate, "Run evaluate on the output afterwards");

  // evaluate
  std::string eval_dir;
  PsfFlags eval_psf;
  std::optional<double> eval_radius;
  std::optional<std::size_t> eval_workers;
  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "Write report.json / report.csv for a run directory");
  evaluate_cmd->add_option("--out,dir", eval_dir, "Run directory written by optimize")->required();
  eval_psf.add(evaluate_cmd);
  evaluate_cmd->add_option("--fovea-radius", eval_radius, "Fovea radius in degrees");
  evaluate_cmd->add_option("--workers", eval_workers, "Concurrent jobs (0 = all cores)");

  // propagate
  std::string prop_phase, prop_out = ".", prop_method = "fourier";
  std::optional<double> prop_distance;
  double prop_pitch = 8e-6, prop_wavelength = 532e-9;
  bool prop_fixture = false, prop_obliquity = false;
  std::uint64_t prop_seed = 1;
  CLI::App* propagate_cmd = app.add_subcommand("propagate", "Propagate a phase-only hologram, or check propagators");
  propagate_cmd->add_option("--phase", prop_phase, "Phase mask (PFM radians or 16-bit PNG)");
  propagate_cmd->add_option("--method", prop_method, "fourier, asm or direct")
      ->check(CLI::IsMember({"fourier", "asm", "direct"}));
  propagate_cmd->add_option("--distance", prop_distance, "Propagation distance in meters (asm, direct; fixture default 0.01)");
  propagate_cmd->add_option("--pitch", prop_pitch, "SLM pixel pitch in meters");
  propagate_cmd->add_option("--wavelength", prop_wavelength, "Wavelength in meters");
  propagate_cmd->add_option("--out", prop_out, "Output directory");
  propagate_cmd->add_flag("--fixture", prop_fixture, "Compare direct summation with ASM on an 8x8 fixture");
  propagate_cmd->add_option("--seed", prop_seed, "Fixture seed");
  propagate_cmd->add_flag("--obliquity", prop_obliquity, "Include the z/rho obliquity factor in the direct sum");

  // simulate-retina
  std::string sim_phase, sim_out = ".";
  PsfFlags sim_psf;
  CLI::App* simulate_cmd = app.add_subcommand("simulate-retina", "Perceived image of a hologram through a PSF");
  simulate_cmd->add_option("--phase", sim_phase, "Phase mask (PFM radians or 16-bit PNG)")->required();
  simulate_cmd->add_option("--out", sim_out, "Output directory");
  sim_psf.add(simulate_cmd);

  // psf
  std::string psf_out = ".";
  PsfFlags psf_flags;
  CLI::App* psf_cmd = app.add_subcommand("psf", "Render a retinal PSF kernel");
  psf_flags.add(psf_cmd);
  psf_cmd->add_option("--out", psf_out, "Output directory");

  // mask
  std::string mask_out = ".", mask_gaze, mask_constants;
  double mask_fov = 16.0;
  std::size_t mask_width = 256, mask_height = 256;
  int mask_x = 1, mask_y = 2;
  bool mask_tan = false;
  CLI::App* mask_cmd = app.add_subcommand("mask", "Render the foveation mask");
  mask_cmd->add_option("--fov-deg", mask_fov, "Horizontal field of view in degrees");
  mask_cmd->add_option("--gaze-deg", mask_gaze, "Gaze X,Y in degrees from the image centre (+y down)");
  mask_cmd->add_option("--width", mask_width, "Image width");
  mask_cmd->add_option("--height", mask_height, "Image height");
  mask_cmd->add_option("--constants", mask_constants, "Meridian constants CSV (meridian,a,r2,re)")
      ->check(CLI::ExistingFile);
  mask_cmd->add_option("--x-meridian", mask_x, "Meridian used for the horizontal term");
  mask_cmd->add_option("--y-meridian", mask_y, "Meridian used for the vertical term");
  mask_cmd->add_flag("--tan-mapping", mask_tan, "Perspective pixel-to-degree mapping");
  mask_cmd->add_option("--out", mask_out, "Output directory");

  // gs
  std::string gs_target, gs_out = ".";
  std::size_t gs_iterations = 200, gs_resolution = 0;
  std::uint64_t gs_seed = 1;
  CLI::App* gs_cmd = app.add_subcommand("gs", "Gerchberg-Saxton phase retrieval");
  gs_cmd->add_option("--target", gs_target, "Target PNG")->required()->check(CLI::ExistingFile);
  gs_cmd->add_option("--iterations", gs_iterations, "Iterations");
  gs_cmd->add_option("--seed", gs_seed, "Initial phase seed");
  gs_cmd->add_option("--resolution", gs_resolution, "Resize the target to N x N (0 keeps native size)");
  gs_cmd->add_option("--out", gs_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  auto make_dir = [](const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
    return dir;
  };

  if (*optimize_cmd) {
    const ExperimentConfig config = build_config(opt);
    const RunSummary run = run_optimize(config, log_line);
    std::printf("%zu jobs written to %s\n", run.jobs.size(), run.out.string().c_str());
    if (opt.evaluate) print_report(run_evaluate(config.out, {std::nullopt, std::nullopt, config.workers}));
    return 0;
  }

  if (*evaluate_cmd) {
    EvaluateOptions options;
    if (eval_psf.set()) {
      PsfConfig c;
      eval_psf.apply(c);
      options.eval_psf = c;
    }
    options.fovea_radius_deg = eval_radius;
    if (eval_workers) options.workers = *eval_workers;
    print_report(run_evaluate(eval_dir, options));
    return 0;
  }

  if (*propagate_cmd) {
    const Optics optics{prop_pitch, prop_wavelength};
    if (prop_fixture) {
      const ComplexField field = beamlet_field(8, 8, prop_seed, optics);
      const double z = prop_distance.value_or(0.01);
      if (!direct_sampling_valid(8, 8, prop_pitch, prop_wavelength, z)) {
        std::fprintf(stderr, "warning: z = %g m is not sampling-valid for the direct sum on this grid\n", z);
      }
      const ComplexField a = propagate_asm(field, z);
      const ComplexField d = propagate_direct(field, z, {64, prop_obliquity});
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::norm(a[i] - d[i]);
        den += std::norm(d[i]);
      }
      const double rms = std::sqrt(num / den);
      std::printf("8x8 fixture, z = %g m: relative RMS (asm vs direct) = %.3e  %s\n", z, rms,
                  rms < 1e-2 ? "ok" : "MISMATCH");
      return 0;
    }
    if (prop_phase.empty()) throw ConfigError("propagate: --phase or --fixture is required");
    const PhaseMask phase = load_phase(prop_phase);
    const ComplexField hologram = make_hologram_field(phase, optics);
    if (prop_method != "fourier" && !prop_distance) throw ConfigError("propagate: --distance is required for " + prop_method);
    ComplexField out;
    if (prop_method == "fourier") {
      out = propagate_fourier(hologram);
    } else if (prop_method == "asm") {
      out = propagate_asm(hologram, *prop_distance);
    } else {
      out = propagate_direct(hologram, *prop_distance, {64, prop_obliquity});
    }
    const fs::path dir = make_dir(prop_out);
    const RealGrid image = intensity(out);
    write_complex_pfm(dir / "field", out.grid());
    write_pfm(dir / "intensity.pfm", image);
    RealGrid shown = image;
    const double m = mean(image);
    for (double& v : shown) v = m > 0.0 ? 0.5 * v / m : 0.0;
    write_gray8_png(dir / "intensity.png", shown);
    std::printf("energy in %.6g, out %.6g\n", energy(hologram), energy(out));
    return 0;
  }

  if (*simulate_cmd) {
    PsfConfig c;
    sim_psf.apply(c);
    const PhaseMask phase = load_phase(sim_phase);
    const RealGrid retina = simulate_retinal_image(phase, build_kernel(c));
    const fs::path dir = make_dir(sim_out);
    write_pfm(dir / "retina.pfm", retina);
    RealGrid shown = retina;
    const double m = mean(retina);
    for (double& v : shown) v = m > 0.0 ? 0.5 * v / m : 0.0;
    write_gray8_png(dir / "retina.png", shown);
    return 0;
  }

  if (*psf_cmd) {
    PsfConfig c;
    psf_flags.apply(c);
    const PsfKernel kernel = build_kernel(c);
    const fs::path dir = make_dir(psf_out);
    write_kernel_pfm(dir / "kernel.pfm", kernel);
    write_heatmap_png(dir / "kernel.png", kernel);
    std::printf("%zux%zu kernel, sum %.15g, energy transmission %.6f\n", kernel.side(), kernel.side(), sum(kernel),
                kernel.energy_transmission());
    return 0;
  }

  if (*mask_cmd) {
    ViewingGeometry g;
    g.width = mask_width;
    g.height = mask_height;
    g.fov_deg = mask_fov;
    g.tan_mapping = mask_tan;
    if (!mask_gaze.empty()) std::tie(g.gaze_x, g.gaze_y) = parse_gaze(mask_gaze);
    RetinaConfig rc;
    rc.constants = mask_constants;
    rc.x_meridian = mask_x;
    rc.y_meridian = mask_y;
    FoveationMask mask;
    try {
      mask = foveation_mask(g, build_retinal_model(rc));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const fs::path dir = make_dir(mask_out);
    write_pfm(dir / "mask.pfm", mask);
    write_heatmap_png(dir / "mask.png", mask);
    const auto peak = std::max_element(mask.begin(), mask.end()) - mask.begin();
    std::printf("peak at pixel (%zu, %zu)\n", static_cast<std::size_t>(peak) % mask.width(),
                static_cast<std::size_t>(peak) / mask.width());
    return 0;
  }

  if (*gs_cmd) {
    RealGrid target = read_png_gray(gs_target);
    if (gs_resolution > 0) target = resize_area(target, gs_resolution, gs_resolution);
    const GsResult result = gerchberg_saxton(target, {gs_iterations, gs_seed, false});
    const fs::path dir = make_dir(gs_out);
    PhaseMask phase = result.phase;
    for (double& v : phase) v = wrap_phase(v);
    write_pfm(dir / "phase.pfm", phase);
    write_phase_png(dir / "phase.png", phase);
    const RealGrid recon = match_mean(reconstruct_intensity(phase), target);
    write_pfm(dir / "reconstruction.pfm", recon);
    write_gray8_png(dir / "reconstruction.png", recon);
    std::printf("amplitude RMS error %.6g after %zu iterations; PSNR %.2f dB\n", result.final_error, gs_iterations,
                psnr(recon, target));
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
