// Acceptance suite: one PASS/FAIL line per criterion, followed by the measured values.
// Exit status is non-zero when any criterion fails.
//
//   acceptance [--iterations N] [--only 1,2,...]

#include <chrono>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "fovholo/fovholo.hpp"

using namespace fovholo;

namespace {

const fs::path kSource = FOVHOLO_SOURCE_DIR;

struct Verdict {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Verdict> verdicts;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  verdicts.push_back({id, name, pass, detail});
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, name.c_str());
  std::printf("    %s\n", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[1024];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

RealGrid uniform_target(std::size_t w, std::size_t h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RealGrid t(w, h);
  for (double& v : t) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return t;
}

FoveationMask test_mask(std::size_t w, std::size_t h) {
  ViewingGeometry g;
  g.width = w;
  g.height = h;
  g.fov_deg = 4.0;
  g.gaze_x = 0.5;
  g.gaze_y = -0.25;
  return foveation_mask(g);
}

// ---------------------------------------------------------------------------

void criterion_gradient() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_case;
  const PsfKernel psf = gaussian_kernel(0.6);
  const FoveationMask mask = test_mask(16, 16);
  for (ErrorDomain domain : {ErrorDomain::intensity, ErrorDomain::amplitude}) {
    for (Condition c : {Condition::baseline, Condition::foveation_only, Condition::psf_only, Condition::ours}) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const RealGrid target = uniform_target(16, 16, 100 + seed);
        LossSpec spec = make_loss_spec(c, psf, mask, domain);
        spec.illumination = matched_illumination(target, spec);
        PhaseMask phase = random_phase(16, 16, 200 + seed);
        PerceptualLoss objective(target, spec);
        RealGrid analytic;
        objective.value_and_gradient(phase, analytic);
        double num = 0.0, den = 0.0;
        const double h = 1e-5;
        for (std::size_t i = 0; i < phase.size(); ++i) {
          const double keep = phase[i];
          phase[i] = keep + h;
          const double up = objective.value(phase);
          phase[i] = keep - h;
          const double down = objective.value(phase);
          phase[i] = keep;
          const double fd = (up - down) / (2 * h);
          num = std::max(num, std::abs(fd - analytic[i]));
          den = std::max(den, std::abs(fd));
        }
        const double rel = num / den;
        if (rel > worst) {
          worst = rel;
          worst_case = to_string(c) + "/" + to_string(domain) + " seed " + std::to_string(seed);
        }
      }
    }
  }
  const double t = seconds_since(start);
  report(1, "gradient matches central differences (4 conditions x 2 domains x 3 instances, 16x16)",
         worst < 1e-4 && t < 10.0,
         fmt("worst relative inf-norm error %.2e (%s), limit 1e-4; runtime %.2f s, limit 10 s", worst,
             worst_case.c_str(), t));
}

void criterion_propagators() {
  const Optics optics{8e-6, 532e-9};
  double worst = 0.0;
  bool all_valid = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ComplexField field = beamlet_field(8, 8, seed, optics);
    const double z = 0.01;
    all_valid = all_valid && direct_sampling_valid(8, 8, optics.pitch, optics.wavelength, z);
    const ComplexField a = propagate_asm(field, z);
    const ComplexField d = propagate_direct(field, z);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      num += std::norm(a[i] - d[i]);
      den += std::norm(d[i]);
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  double energy_err = 0.0, roundtrip_err = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PhaseMask phase = random_phase(64, 48, seed);
    ComplexField field = make_hologram_field(phase, optics, 0.7);
    for (std::size_t i = 0; i < field.size(); ++i) field[i] *= 1.0 + 0.5 * std::sin(double(i));
    const ComplexField f = propagate_fourier(field);
    energy_err = std::max(energy_err, std::abs(energy(f) - energy(field)) / energy(field));
    const ComplexField back = inverse_propagate_fourier(f);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i) {
      num += std::norm(back[i] - field[i]);
      den += std::norm(field[i]);
    }
    roundtrip_err = std::max(roundtrip_err, std::sqrt(num / den));
  }
  report(2, "ASM vs direct summation on 8x8 sampling-valid fixtures; Fourier propagator unitary",
         all_valid && worst < 1e-2 && energy_err < 1e-10 && roundtrip_err < 1e-12,
         fmt("worst ASM/direct relative RMS %.2e over 20 fixtures (limit 1e-2, all sampling-valid: %s); "
             "energy error %.1e (limit 1e-10); round trip %.1e (limit 1e-12)",
             worst, all_valid ? "yes" : "no", energy_err, roundtrip_err));
}

void criterion_density() {
  bool anchors = true;
  for (int m = 1; m <= 4; ++m) anchors = anchors && mrgc_density(0.0, m) == 29609.2;
  bool decreasing = true;
  for (int m = 1; m <= 4; ++m) {
    double prev = mrgc_density(0.0, m);
    for (int i = 1; i <= 90000; ++i) {
      const double cur = mrgc_density(i * 1e-3, m);
      decreasing = decreasing && cur < prev;
      prev = cur;
    }
  }
  report(3, "mRGC density anchor and monotone decrease on [0, 90] deg", anchors && decreasing,
         fmt("density(0, m) = %.1f for m = 1..4 (%s); strictly decreasing on a 1e-3 deg grid: %s",
             mrgc_density(0.0, 1), anchors ? "exact" : "MISMATCH", decreasing ? "yes" : "no"));
}

void criterion_collapse() {
  const RealGrid target = uniform_target(16, 16, 7);
  const PhaseMask phase = random_phase(16, 16, 8);
  const PsfKernel psf = gaussian_kernel(0.6);
  const FoveationMask mask = test_mask(16, 16);
  double worst = 0.0;
  auto compare = [&](const LossSpec& a, const LossSpec& b) {
    RealGrid ga, gb;
    const double va = PerceptualLoss(target, a).value_and_gradient(phase, ga);
    const double vb = PerceptualLoss(target, b).value_and_gradient(phase, gb);
    worst = std::max(worst, std::abs(va - vb));
    for (std::size_t i = 0; i < ga.size(); ++i) worst = std::max(worst, std::abs(ga[i] - gb[i]));
  };
  for (ErrorDomain d : {ErrorDomain::intensity, ErrorDomain::amplitude}) {
    compare(make_loss_spec(Condition::ours, psf, unit_mask(16, 16), d), make_loss_spec(Condition::psf_only, psf, mask, d));
    compare(make_loss_spec(Condition::ours, delta_kernel(), mask, d),
            make_loss_spec(Condition::foveation_only, psf, mask, d));
    compare(make_loss_spec(Condition::ours, delta_kernel(), unit_mask(16, 16), d),
            make_loss_spec(Condition::baseline, psf, mask, d));
  }
  report(7, "condition-collapse identities (unit mask, delta PSF, both)", worst < 1e-10,
         fmt("largest loss/gradient difference %.2e, limit 1e-10", worst));
}

void criterion_gs() {
  // self-consistent targets: |F(exp(j phi))|^2 for a known phi
  double worst_final = 0.0, worst_increase = 0.0;
  std::ostringstream per;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const RealGrid target = reconstruct_intensity(random_phase(64, 64, 1000 + seed));
    GsConfig cfg;
    cfg.iterations = 200;
    cfg.seed = seed;
    const GsResult r = gerchberg_saxton(target, cfg);
    worst_final = std::max(worst_final, r.final_error);
    std::vector<double> errors = r.amplitude_error;
    errors.push_back(r.final_error);
    for (std::size_t k = 1; k < errors.size(); ++k) worst_increase = std::max(worst_increase, errors[k] - errors[k - 1]);
    per << (seed ? ", " : "") << fmt("%.3e", r.final_error);
  }
  report(9, "Gerchberg-Saxton on self-consistent 64x64 targets", worst_final < 1e-3 && worst_increase <= 1e-9,
         fmt("amplitude RMS after 200 iterations: %s (limit 1e-3; mean amplitude 1); "
             "largest increase between iterations %.1e (limit 1e-9)",
             per.str().c_str(), worst_increase));
}

// ---------------------------------------------------------------------------
// Image-set experiments (criteria 4, 5, 6, 8)

struct ImageSet {
  std::vector<std::string> names;
  std::vector<RealGrid> targets;
};

ImageSet load_images() {
  ImageSet s;
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(kSource / "data" / "images")) {
    if (e.path().extension() == ".png") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) {
    s.names.push_back(p.stem().string());
    s.targets.push_back(resize_area(read_png_gray(p), 256, 256));
  }
  return s;
}

struct Eye {
  std::string name;
  PsfKernel psf;
};

std::vector<Eye> load_eyes() {
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(kSource / "data" / "zernike")) paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  std::vector<Eye> eyes;
  for (const auto& p : paths) {
    PsfConfig c;
    c.type = "zernike";
    c.file = p;
    eyes.push_back({p.stem().string(), build_kernel(c)});
  }
  return eyes;
}

void image_set_criteria(std::size_t iterations, const std::set<int>& only) {
  const ImageSet set = load_images();
  const std::vector<Eye> eyes = load_eyes();
  const PsfKernel gauss = gaussian_kernel(0.6);
  const ViewingGeometry geometry;  // 256 px over 16 deg, gaze at the centre
  const FoveationMask mask = foveation_mask(geometry);
  const std::size_t n_images = set.targets.size();

  // Jobs: the four conditions with the Gaussian PSF, plus psf_only optimized for each eye.
  struct Task {
    std::size_t image;
    Condition condition;
    int eye;  // -1: gaussian
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < n_images; ++i) {
    for (Condition c : {Condition::baseline, Condition::foveation_only, Condition::psf_only, Condition::ours}) {
      tasks.push_back({i, c, -1});
    }
    for (std::size_t e = 0; e < eyes.size(); ++e) tasks.push_back({i, Condition::psf_only, int(e)});
  }
  std::vector<PhaseMask> phases(tasks.size());
  const auto start = std::chrono::steady_clock::now();
  std::mutex log_mutex;
  run_parallel(tasks.size(), 0, [&](std::size_t k) {
    const Task& t = tasks[k];
    const RealGrid& target = set.targets[t.image];
    const PsfKernel& psf = t.eye < 0 ? gauss : eyes[std::size_t(t.eye)].psf;
    LossSpec spec = make_loss_spec(t.condition, psf, mask);
    spec.illumination = matched_illumination(target, spec);
    OptimizerConfig cfg;
    cfg.iterations = iterations;
    cfg.seed = 1 + t.image;
    const OptimizationResult r = optimize(target, spec, cfg);
    phases[k] = r.phase;
    std::lock_guard lock(log_mutex);
    std::fprintf(stderr, "  [%zu/%zu] %s %s%s loss %.4g -> %.4g\n", k + 1, tasks.size(), set.names[t.image].c_str(),
                 to_string(t.condition).c_str(), t.eye < 0 ? "" : (" @" + eyes[std::size_t(t.eye)].name).c_str(),
                 r.trace.loss.front(), r.best_loss);
  });
  const double optimize_seconds = seconds_since(start);
  auto find = [&](std::size_t image, Condition c, int eye) -> const PhaseMask& {
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      if (tasks[k].image == image && tasks[k].condition == c && tasks[k].eye == eye) return phases[k];
    }
    throw std::logic_error("missing task");
  };
  auto retinal = [&](const PhaseMask& phase, const PsfKernel& psf, const RealGrid& target) {
    return match_mean(simulate_retinal_image(phase, psf), target);
  };

  // Criterion 4: evaluated through each eye's PSF, averaged over images and eyes.
  double psnr_base = 0, psnr_gauss = 0, psnr_direct = 0, ssim_base = 0, ssim_gauss = 0, ssim_direct = 0;
  // Criterion 8: per eye, mean over images
  std::vector<double> eye_base(eyes.size(), 0.0), eye_gauss(eyes.size(), 0.0);
  std::size_t pair_wins = 0;
  for (std::size_t i = 0; i < n_images; ++i) {
    const RealGrid& target = set.targets[i];
    for (std::size_t e = 0; e < eyes.size(); ++e) {
      const RealGrid rb = retinal(find(i, Condition::baseline, -1), eyes[e].psf, target);
      const RealGrid rg = retinal(find(i, Condition::psf_only, -1), eyes[e].psf, target);
      const RealGrid rd = retinal(find(i, Condition::psf_only, int(e)), eyes[e].psf, target);
      const double pb = psnr(rb, target), pg = psnr(rg, target), pd = psnr(rd, target);
      psnr_base += pb;
      psnr_gauss += pg;
      psnr_direct += pd;
      ssim_base += ssim(rb, target);
      ssim_gauss += ssim(rg, target);
      ssim_direct += ssim(rd, target);
      eye_base[e] += pb / double(n_images);
      eye_gauss[e] += pg / double(n_images);
      if (pg > pb) ++pair_wins;
    }
  }
  const double n_pairs = double(n_images * eyes.size());
  psnr_base /= n_pairs;
  psnr_gauss /= n_pairs;
  psnr_direct /= n_pairs;
  ssim_base /= n_pairs;
  ssim_gauss /= n_pairs;
  ssim_direct /= n_pairs;

  const std::string runtime = fmt("optimization of %zu jobs x %zu iterations took %.0f s", tasks.size(), iterations,
                                  optimize_seconds);
  if (only.empty() || only.count(4)) {
    const bool psnr_ok = psnr_base + 6.0 <= psnr_gauss && psnr_gauss <= psnr_direct;
    const bool ssim_ok = ssim_base < ssim_gauss && ssim_gauss < ssim_direct && ssim_gauss - ssim_base >= 0.1 &&
                         ssim_direct - ssim_base >= 0.1;
    report(4, "speckle-reduction trend under Zernike eye PSFs (baseline / Gaussian-optimized / eye-optimized)",
           psnr_ok && ssim_ok,
           fmt("mean retinal PSNR %.2f / %.2f / %.2f dB (gap %.2f dB, need >= 6 and ordered); "
               "mean SSIM %.3f / %.3f / %.3f (need strict order, gap >= 0.1); %s",
               psnr_base, psnr_gauss, psnr_direct, psnr_gauss - psnr_base, ssim_base, ssim_gauss, ssim_direct,
               runtime.c_str()));
  }

  // Criteria 5 and 6: the condition grid evaluated through the Gaussian PSF.
  std::vector<ReportRow> rows;
  for (std::size_t i = 0; i < n_images; ++i) {
    for (Condition c : {Condition::baseline, Condition::foveation_only, Condition::psf_only, Condition::ours}) {
      rows.push_back(evaluate_phase(set.names[i], to_string(c), find(i, c, -1), set.targets[i], gauss, geometry, 3.0));
    }
  }
  const MetricsReport rep = normalized_report(rows);
  std::map<std::string, double> norm;
  for (const auto& s : rep.summary) norm[s.condition] = s.normalized_retinal;
  if (only.empty() || only.count(5)) {
    const bool ok = norm["ours"] < 0.10 && norm["psf_only"] < 0.10 && norm["foveation_only"] >= 0.8 &&
                    norm["foveation_only"] <= 1.2;
    report(5, "normalized retinal MSE vs baseline (Gaussian evaluation PSF)", ok,
           fmt("ours %.4f, psf_only %.4f (limit < 0.10); foveation_only %.4f (limit 0.8..1.2)", norm["ours"],
               norm["psf_only"], norm["foveation_only"]));
  }
  if (only.empty() || only.count(6)) {
    std::size_t both = 0;
    std::ostringstream per;
    for (std::size_t i = 0; i < n_images; ++i) {
      const ReportRow* ours = nullptr;
      const ReportRow* psf_only = nullptr;
      for (const auto& r : rep.rows) {
        if (r.image != set.names[i]) continue;
        if (r.condition == "ours") ours = &r;
        if (r.condition == "psf_only") psf_only = &r;
      }
      const bool fov = ours->retinal.foveal_mse < psf_only->retinal.foveal_mse;
      const bool per_ok = ours->retinal.peripheral_mse >= psf_only->retinal.peripheral_mse;
      if (fov && per_ok) ++both;
      per << (i ? "; " : "")
          << fmt("%s fovea %.2e vs %.2e, periphery %.2e vs %.2e", set.names[i].c_str(), ours->retinal.foveal_mse,
                 psf_only->retinal.foveal_mse, ours->retinal.peripheral_mse, psf_only->retinal.peripheral_mse);
    }
    report(6, "foveation moves error from fovea to periphery (ours vs psf_only)", both >= 5,
           fmt("%zu of %zu images have lower foveal and no lower peripheral MSE (need >= 5): %s", both, n_images,
               per.str().c_str()));
  }
  if (only.empty() || only.count(8)) {
    bool ok = true;
    std::ostringstream per;
    for (std::size_t e = 0; e < eyes.size(); ++e) {
      ok = ok && eye_gauss[e] > eye_base[e];
      per << (e ? "; " : "") << fmt("%s %.2f vs %.2f dB", eyes[e].name.c_str(), eye_gauss[e], eye_base[e]);
    }
    report(8, "Gaussian-optimized holograms beat baseline under every bundled Zernike PSF", ok,
           fmt("mean PSNR per eye (Gaussian-optimized vs baseline): %s; per image and eye %zu of %zu", per.str().c_str(),
               pair_wins, std::size_t(n_pairs)));
  }
}

void criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / "fovholo_acceptance_determinism";
  fs::remove_all(root);
  auto run = [&](const fs::path& out, std::size_t workers) {
    ExperimentConfig c;
    c.targets = {kSource / "data" / "images" / "camera.png", kSource / "data" / "images" / "zone_plate.png"};
    c.resolution = 64;
    c.optimizer.iterations = 30;
    c.seed = 42;
    c.workers = workers;
    c.out = out;
    run_optimize(c);
  };
  run(root / "a", 0);
  run(root / "b", 1);
  std::size_t compared = 0, identical = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    const std::string name = e.path().filename().string();
    if (name != "phase.pfm" && name != "phase.png") continue;
    const fs::path other = root / "b" / fs::relative(e.path(), root / "a");
    ++compared;
    if (fs::exists(other) && sha256_file(e.path()) == sha256_file(other)) ++identical;
  }
  fs::remove_all(root);
  report(10, "fixed-seed pipeline reruns produce byte-identical phase files", compared == 16 && identical == compared,
         fmt("%zu of %zu phase files identical across two runs (2 images x 4 conditions, PFM and PNG)", identical,
             compared));
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t iterations = 500;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--iterations" && i + 1 < argc) {
      iterations = std::stoul(argv[++i]);
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else {
      std::fprintf(stderr, "usage: acceptance [--iterations N] [--only 1,2,...]\n");
      return 2;
    }
  }
  auto want = [&](int id) { return only.empty() || only.count(id) > 0; };
  try {
    if (want(1)) criterion_gradient();
    if (want(2)) criterion_propagators();
    if (want(3)) criterion_density();
    if (want(4) || want(5) || want(6) || want(8)) image_set_criteria(iterations, only);
    if (want(7)) criterion_collapse();
    if (want(9)) criterion_gs();
    if (want(10)) criterion_determinism();
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
  std::size_t failed = 0;
  std::printf("\nsummary\n");
  for (const auto& v : verdicts) {
    std::printf("  %s criterion %d: %s\n", v.pass ? "PASS" : "FAIL", v.id, v.name.c_str());
    if (!v.pass) ++failed;
  }
  std::printf("%zu of %zu criteria passed\n", verdicts.size() - failed, verdicts.size());
  return failed == 0 ? 0 : 1;
}
