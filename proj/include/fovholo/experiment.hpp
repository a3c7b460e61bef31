#pragma once

// Experiment configuration, the (image x condition) runner, run manifests and evaluation
// reports.

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fovholo/errors.hpp"
#include "fovholo/io.hpp"
#include "fovholo/metrics.hpp"
#include "fovholo/phase_retrieval.hpp"
#include "fovholo/psf.hpp"
#include "fovholo/retina.hpp"

namespace fovholo {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

/// Retinal PSF selection: "delta", "gaussian" (sigma in image pixels), "zernike" (coefficient
/// file) or "pfm" (a stored kernel).
struct PsfConfig {
  std::string type = "gaussian";
  double sigma = 0.6;
  std::size_t support = 0;  // 0 = smallest odd >= 6 sigma + 1
  fs::path file;
  ZernikeSpec zernike;
  std::size_t size = 9;  // zernike kernel side

  void validate() const {
    if (type == "gaussian") {
      if (!(sigma > 0.0)) throw ConfigError("psf: sigma must be positive");
    } else if (type == "zernike" || type == "pfm") {
      if (file.empty()) throw ConfigError("psf: type '" + type + "' needs a file");
      if (type == "zernike" && size % 2 == 0) throw ConfigError("psf: zernike size must be odd");
    } else if (type != "delta") {
      throw ConfigError("psf: unknown type '" + type + "' (expected delta, gaussian, zernike or pfm)");
    }
  }
};

inline PsfKernel build_kernel(const PsfConfig& config) {
  config.validate();
  try {
    if (config.type == "delta") return delta_kernel();
    if (config.type == "gaussian") return gaussian_kernel(config.sigma, config.support);
    if (config.type == "pfm") return read_kernel_pfm(config.file);
    ZernikeSpec spec = config.zernike;
    spec.modes = read_zernike_csv(config.file);
    return zernike_psf(spec, config.size);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("psf: ") + e.what());
  }
}

struct RetinaConfig {
  fs::path constants;  // optional `meridian,a,r2,re` override file
  double rho_cone = 14804.6;
  int x_meridian = 1;
  int y_meridian = 2;
};

inline RetinalModel build_retinal_model(const RetinaConfig& config) {
  RetinalModel model;
  model.rho_cone = config.rho_cone;
  model.x_meridian = config.x_meridian;
  model.y_meridian = config.y_meridian;
  if (!config.constants.empty()) model = read_retina_constants_csv(config.constants, model);
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return model;
}

struct ExperimentConfig {
  std::vector<fs::path> targets;
  std::size_t resolution = 256;  // images are area-resized to resolution^2; 0 keeps their size
  bool srgb_decode = true;
  double fov_deg = 16.0;
  double gaze_x = 0.0;
  double gaze_y = 0.0;
  bool tan_mapping = false;
  std::vector<Condition> conditions{Condition::baseline, Condition::foveation_only, Condition::psf_only,
                                    Condition::ours};
  PsfConfig psf;
  std::optional<PsfConfig> eval_psf;  // defaults to psf
  ErrorDomain error_domain = ErrorDomain::intensity;
  bool intensity_psf = false;
  std::optional<double> illumination;  // unset: matched_illumination per target and condition
  RetinaConfig retina;
  OptimizerConfig optimizer;
  double fovea_radius_deg = 3.0;
  std::uint64_t seed = 1;
  fs::path out = "runs/default";
  std::size_t workers = 0;  // 0 = hardware concurrency

  const PsfConfig& evaluation_psf() const { return eval_psf ? *eval_psf : psf; }

  ViewingGeometry geometry(std::size_t width, std::size_t height) const {
    ViewingGeometry g;
    g.width = width;
    g.height = height;
    g.fov_deg = fov_deg;
    g.gaze_x = gaze_x;
    g.gaze_y = gaze_y;
    g.tan_mapping = tan_mapping;
    return g;
  }

  void validate() const {
    if (targets.empty()) throw ConfigError("config: at least one target image is required");
    if (conditions.empty()) throw ConfigError("config: at least one condition is required");
    std::set<Condition> seen;
    for (Condition c : conditions) {
      if (!seen.insert(c).second) throw ConfigError("config: condition " + to_string(c) + " listed twice");
    }
    std::set<std::string> names;
    for (const auto& t : targets) {
      if (!names.insert(t.stem().string()).second) {
        throw ConfigError("config: two targets share the name '" + t.stem().string() + "'");
      }
    }
    psf.validate();
    if (eval_psf) eval_psf->validate();
    if (illumination && !(*illumination > 0.0)) throw ConfigError("config: illumination must be positive");
    if (!(fovea_radius_deg > 0.0)) throw ConfigError("config: fovea radius must be positive");
    try {
      optimizer.validate();
      const std::size_t side = resolution == 0 ? 16 : resolution;
      geometry(side, side).validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
};

namespace detail {

template <class T>
void read_key(const json& j, const char* key, T& value) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    value = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

inline fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace detail

inline PsfConfig psf_config_from_json(const json& j, const fs::path& base) {
  detail::check_keys(j,
                     {"type", "sigma", "support", "file", "size", "pupil_diameter_mm", "wavelength", "pupil_samples",
                      "pixel_arcmin"},
                     "psf");
  PsfConfig c;
  std::string file;
  detail::read_key(j, "type", c.type);
  detail::read_key(j, "sigma", c.sigma);
  detail::read_key(j, "support", c.support);
  detail::read_key(j, "file", file);
  detail::read_key(j, "size", c.size);
  detail::read_key(j, "pupil_diameter_mm", c.zernike.pupil_diameter_mm);
  detail::read_key(j, "wavelength", c.zernike.wavelength);
  detail::read_key(j, "pupil_samples", c.zernike.pupil_samples);
  detail::read_key(j, "pixel_arcmin", c.zernike.pixel_arcmin);
  c.file = detail::resolve(file, base);
  return c;
}

inline json to_json(const PsfConfig& c) {
  json j = {{"type", c.type}};
  if (c.type == "gaussian") {
    j["sigma"] = c.sigma;
    j["support"] = c.support;
  } else if (c.type != "delta") {
    j["file"] = c.file.generic_string();
  }
  if (c.type == "zernike") {
    j["size"] = c.size;
    j["pupil_diameter_mm"] = c.zernike.pupil_diameter_mm;
    j["wavelength"] = c.zernike.wavelength;
    j["pupil_samples"] = c.zernike.pupil_samples;
    j["pixel_arcmin"] = c.zernike.pixel_arcmin;
  }
  return j;
}

inline json to_json(const OptimizerConfig& c) {
  json j = {{"iterations", c.iterations},
            {"step_size", c.step_size},
            {"rule", c.rule == UpdateRule::adam ? "adam" : "gradient_descent"},
            {"stop_tolerance", c.stop_tolerance},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"epsilon", c.epsilon}};
  j["quantize_bits"] = c.quantize_bits ? json(*c.quantize_bits) : json(nullptr);
  return j;
}

/// Paths inside the document are resolved against `base` (the config file's directory).
inline ExperimentConfig config_from_json(const json& j, const fs::path& base = {}) {
  detail::check_keys(j,
                     {"targets", "resolution", "srgb_decode", "fov_deg", "gaze_deg", "tan_mapping", "conditions", "psf",
                      "eval_psf", "error_domain", "intensity_psf", "illumination", "retina", "optimizer",
                      "fovea_radius_deg", "seed", "out", "workers"},
                     "the top level");
  ExperimentConfig c;
  std::vector<std::string> targets;
  detail::read_key(j, "targets", targets);
  for (const auto& t : targets) c.targets.push_back(detail::resolve(t, base));
  detail::read_key(j, "resolution", c.resolution);
  detail::read_key(j, "srgb_decode", c.srgb_decode);
  detail::read_key(j, "fov_deg", c.fov_deg);
  if (j.contains("gaze_deg")) {
    std::vector<double> gaze;
    detail::read_key(j, "gaze_deg", gaze);
    if (gaze.size() != 2) throw ConfigError("config: gaze_deg must be [x, y]");
    c.gaze_x = gaze[0];
    c.gaze_y = gaze[1];
  }
  detail::read_key(j, "tan_mapping", c.tan_mapping);
  if (j.contains("conditions")) {
    std::vector<std::string> names;
    detail::read_key(j, "conditions", names);
    c.conditions.clear();
    for (const auto& n : names) c.conditions.push_back(parse_condition(n));
  }
  if (j.contains("psf")) c.psf = psf_config_from_json(j.at("psf"), base);
  if (j.contains("eval_psf") && !j.at("eval_psf").is_null()) c.eval_psf = psf_config_from_json(j.at("eval_psf"), base);
  if (j.contains("error_domain")) {
    std::string d;
    detail::read_key(j, "error_domain", d);
    c.error_domain = parse_error_domain(d);
  }
  detail::read_key(j, "intensity_psf", c.intensity_psf);
  if (j.contains("illumination") && !j.at("illumination").is_null()) {
    const json& v = j.at("illumination");
    if (v.is_string() && v.get<std::string>() == "matched") {
      c.illumination.reset();
    } else if (v.is_number()) {
      c.illumination = v.get<double>();
    } else {
      throw ConfigError("config: illumination must be a number or \"matched\"");
    }
  }
  if (j.contains("retina")) {
    const json& r = j.at("retina");
    detail::check_keys(r, {"constants", "rho_cone", "x_meridian", "y_meridian"}, "retina");
    std::string constants;
    detail::read_key(r, "constants", constants);
    c.retina.constants = detail::resolve(constants, base);
    detail::read_key(r, "rho_cone", c.retina.rho_cone);
    detail::read_key(r, "x_meridian", c.retina.x_meridian);
    detail::read_key(r, "y_meridian", c.retina.y_meridian);
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    detail::check_keys(o,
                       {"iterations", "step_size", "rule", "stop_tolerance", "quantize_bits", "beta1", "beta2",
                        "epsilon"},
                       "optimizer");
    detail::read_key(o, "iterations", c.optimizer.iterations);
    detail::read_key(o, "step_size", c.optimizer.step_size);
    detail::read_key(o, "stop_tolerance", c.optimizer.stop_tolerance);
    detail::read_key(o, "beta1", c.optimizer.beta1);
    detail::read_key(o, "beta2", c.optimizer.beta2);
    detail::read_key(o, "epsilon", c.optimizer.epsilon);
    if (o.contains("quantize_bits") && !o.at("quantize_bits").is_null()) {
      int bits = 0;
      detail::read_key(o, "quantize_bits", bits);
      c.optimizer.quantize_bits = bits;
    }
    if (o.contains("rule")) {
      std::string rule;
      detail::read_key(o, "rule", rule);
      if (rule == "adam") {
        c.optimizer.rule = UpdateRule::adam;
      } else if (rule == "gradient_descent") {
        c.optimizer.rule = UpdateRule::gradient_descent;
      } else {
        throw ConfigError("config: unknown optimizer rule '" + rule + "'");
      }
    }
  }
  detail::read_key(j, "fovea_radius_deg", c.fovea_radius_deg);
  detail::read_key(j, "seed", c.seed);
  std::string out;
  detail::read_key(j, "out", out);
  if (!out.empty()) c.out = out;
  detail::read_key(j, "workers", c.workers);
  return c;
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["targets"] = json::array();
  for (const auto& t : c.targets) j["targets"].push_back(t.generic_string());
  j["resolution"] = c.resolution;
  j["srgb_decode"] = c.srgb_decode;
  j["fov_deg"] = c.fov_deg;
  j["gaze_deg"] = {c.gaze_x, c.gaze_y};
  j["tan_mapping"] = c.tan_mapping;
  j["conditions"] = json::array();
  for (Condition cond : c.conditions) j["conditions"].push_back(to_string(cond));
  j["psf"] = to_json(c.psf);
  j["eval_psf"] = c.eval_psf ? to_json(*c.eval_psf) : json(nullptr);
  j["error_domain"] = to_string(c.error_domain);
  j["intensity_psf"] = c.intensity_psf;
  j["illumination"] = c.illumination ? json(*c.illumination) : json("matched");
  j["retina"] = {{"constants", c.retina.constants.generic_string()},
                 {"rho_cone", c.retina.rho_cone},
                 {"x_meridian", c.retina.x_meridian},
                 {"y_meridian", c.retina.y_meridian}};
  j["optimizer"] = to_json(c.optimizer);
  j["fovea_radius_deg"] = c.fovea_radius_deg;
  j["seed"] = c.seed;
  j["out"] = c.out.generic_string();
  j["workers"] = c.workers;
  return j;
}

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const fs::path& path) {
  return config_from_json(read_json_file(path), path.parent_path());
}

inline void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Manifest

inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("sha256: init failed");
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

/// Files written into a run directory, recorded relative to it with content hashes.
class Manifest {
 public:
  explicit Manifest(fs::path root) : root_(std::move(root)) {}

  void add(const fs::path& file) {
    std::lock_guard lock(mutex_);
    files_.insert(fs::relative(file, root_).generic_string());
  }

  const std::set<std::string>& files() const { return files_; }

  json to_json() const {
    json list = json::array();
    for (const auto& f : files_) {
      const fs::path p = root_ / f;
      list.push_back({{"path", f}, {"sha256", sha256_file(p)}, {"bytes", fs::file_size(p)}});
    }
    return list;
  }

 private:
  fs::path root_;
  std::set<std::string> files_;
  std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Runner

struct Job {
  std::string image;
  std::size_t image_index = 0;
  Condition condition = Condition::baseline;
};

struct JobOutcome {
  Job job;
  std::uint64_t seed = 0;
  double illumination = 1.0;
  double initial_loss = 0.0;
  double best_loss = 0.0;
  std::size_t iterations_run = 0;
  double seconds = 0.0;
};

using Logger = std::function<void(const std::string&)>;

inline std::string image_name(const fs::path& target) { return target.stem().string(); }

inline RealGrid load_target(const fs::path& path, const ExperimentConfig& config) {
  RealGrid image = read_png_gray(path, config.srgb_decode);
  if (config.resolution > 0) image = resize_area(image, config.resolution, config.resolution);
  for (double& v : image) v = std::clamp(v, 0.0, 1.0);
  return image;
}

/// Optimization seed of an image: every condition of one image starts from the same phase.
inline std::uint64_t job_seed(const ExperimentConfig& config, std::size_t image_index) {
  return config.seed + image_index;
}

inline std::size_t resolve_workers(std::size_t requested, std::size_t jobs) {
  std::size_t w = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  return std::clamp<std::size_t>(w, 1, std::max<std::size_t>(jobs, 1));
}

/// Runs `task(i)` for i in [0, count) on a pool of workers; the first exception (in job
/// order) is rethrown after every worker has joined.
inline void run_parallel(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < resolve_workers(workers, count); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            task(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline json trace_json(const JobOutcome& o, const OptimizationTrace& trace) {
  return {{"image", o.job.image},
          {"condition", to_string(o.job.condition)},
          {"seed", o.seed},
          {"illumination", o.illumination},
          {"iterations_run", trace.loss.empty() ? 0 : trace.loss.size() - 1},
          {"best_iteration", trace.best_iteration},
          {"stopped_early", trace.stopped_early},
          {"loss", trace.loss},
          {"seconds", trace.seconds}};
}

struct RunSummary {
  fs::path out;
  std::vector<JobOutcome> jobs;
};

/// Optimizes every (target, condition) pair and writes, under config.out:
///   config.json, manifest.json
///   <image>/target.pfm, <image>/target.png
///   <image>/<condition>/{phase.pfm, phase.png, reconstruction.pfm, retina.pfm, retina.png, trace.json}
inline RunSummary run_optimize(const ExperimentConfig& config, const Logger& log = {}) {
  config.validate();
  std::error_code ec;
  fs::create_directories(config.out, ec);
  if (ec || !fs::is_directory(config.out)) throw IoError("cannot create output directory " + config.out.string());

  const PsfKernel psf = build_kernel(config.psf);
  const PsfKernel eval_psf = build_kernel(config.evaluation_psf());
  const RetinalModel model = build_retinal_model(config.retina);

  std::vector<RealGrid> targets;
  for (const auto& path : config.targets) targets.push_back(load_target(path, config));

  Manifest manifest(config.out);
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::string name = image_name(config.targets[i]);
    const fs::path dir = config.out / name;
    fs::create_directories(dir);
    write_pfm(dir / "target.pfm", targets[i]);
    write_gray8_png(dir / "target.png", targets[i]);
    manifest.add(dir / "target.pfm");
    manifest.add(dir / "target.png");
    for (Condition c : config.conditions) jobs.push_back({name, i, c});
  }

  std::mutex log_mutex;
  auto say = [&](const std::string& msg) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    log(msg);
  };

  RunSummary summary{config.out, std::vector<JobOutcome>(jobs.size())};
  run_parallel(jobs.size(), config.workers, [&](std::size_t k) {
    const Job& job = jobs[k];
    const RealGrid& target = targets[job.image_index];
    const ViewingGeometry geometry = config.geometry(target.width(), target.height());
    FoveationMask mask;
    if (uses_foveation(job.condition)) mask = foveation_mask(geometry, model);
    LossSpec spec = make_loss_spec(job.condition, psf, mask, config.error_domain);
    spec.intensity_psf = config.intensity_psf;
    spec.illumination = config.illumination ? *config.illumination : matched_illumination(target, spec);

    OptimizerConfig opt = config.optimizer;
    opt.seed = job_seed(config, job.image_index);
    const OptimizationResult result = optimize(target, spec, opt);

    PhaseMask phase(target.width(), target.height());
    for (std::size_t i = 0; i < phase.size(); ++i) phase[i] = wrap_phase(result.phase[i]);

    const fs::path dir = config.out / job.image / to_string(job.condition);
    fs::create_directories(dir);
    write_pfm(dir / "phase.pfm", phase);
    write_phase_png(dir / "phase.png", phase);
    const RealGrid recon = match_mean(reconstruct_intensity(phase, spec.illumination), target);
    const RealGrid retina = match_mean(simulate_retinal_image(phase, eval_psf), target);
    write_pfm(dir / "reconstruction.pfm", recon);
    write_pfm(dir / "retina.pfm", retina);
    write_gray8_png(dir / "retina.png", retina);

    JobOutcome& o = summary.jobs[k];
    o.job = job;
    o.seed = opt.seed;
    o.illumination = spec.illumination;
    o.initial_loss = result.trace.loss.front();
    o.best_loss = result.best_loss;
    o.iterations_run = result.trace.loss.size() - 1;
    for (double s : result.trace.seconds) o.seconds += s;
    write_json_file(dir / "trace.json", trace_json(o, result.trace));
    for (const char* f : {"phase.pfm", "phase.png", "reconstruction.pfm", "retina.pfm", "retina.png", "trace.json"}) {
      manifest.add(dir / f);
    }
    std::ostringstream msg;
    msg << job.image << '/' << to_string(job.condition) << ": loss " << o.initial_loss << " -> " << o.best_loss
        << " (" << o.iterations_run << " iterations, " << std::fixed << std::setprecision(1) << o.seconds << " s)";
    say(msg.str());
  });

  write_json_file(config.out / "config.json", to_json(config));
  manifest.add(config.out / "config.json");
  json jobs_json = json::array();
  for (const auto& o : summary.jobs) {
    jobs_json.push_back({{"image", o.job.image},
                         {"condition", to_string(o.job.condition)},
                         {"seed", o.seed},
                         {"illumination", o.illumination},
                         {"dir", o.job.image + "/" + to_string(o.job.condition)}});
  }
  write_json_file(config.out / "manifest.json", {{"jobs", jobs_json}, {"files", manifest.to_json()}});
  return summary;
}

// ---------------------------------------------------------------------------
// Evaluation

inline json to_json(const ImageMetrics& m) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(v > 0 ? "inf" : "-inf"); };
  return {{"mse", m.mse},
          {"psnr", num(m.psnr)},
          {"ssim", m.ssim},
          {"foveal_mse", m.foveal_mse},
          {"peripheral_mse", m.peripheral_mse}};
}

inline json to_json(const MetricsReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"image", r.image},
                    {"condition", r.condition},
                    {"retinal", to_json(r.retinal)},
                    {"reconstruction", to_json(r.reconstruction)},
                    {"normalized_retinal_mse", r.normalized_retinal},
                    {"normalized_reconstruction_mse", r.normalized_reconstruction}});
  }
  json summary = json::array();
  for (const auto& s : report.summary) {
    summary.push_back({{"condition", s.condition},
                       {"images", s.images},
                       {"retinal", to_json(s.retinal)},
                       {"reconstruction", to_json(s.reconstruction)},
                       {"normalized_retinal_mse", s.normalized_retinal},
                       {"normalized_reconstruction_mse", s.normalized_reconstruction}});
  }
  return {{"rows", rows}, {"summary", summary}};
}

namespace detail {

inline std::string csv_metrics(const ImageMetrics& m) {
  std::ostringstream s;
  s << std::setprecision(8) << m.psnr << ',' << m.ssim << ',' << m.mse << ',' << m.foveal_mse << ','
    << m.peripheral_mse;
  return s.str();
}

inline const char* kCsvMetricColumns =
    "retinal_psnr,retinal_ssim,retinal_mse,retinal_foveal_mse,retinal_peripheral_mse,"
    "recon_psnr,recon_ssim,recon_mse,recon_foveal_mse,recon_peripheral_mse,"
    "normalized_retinal_mse,normalized_recon_mse";

}  // namespace detail

/// Table-style CSV: one row per condition (means over images).
inline void write_summary_csv(const fs::path& path, const MetricsReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "condition,images," << detail::kCsvMetricColumns << '\n';
  for (const auto& s : report.summary) {
    out << s.condition << ',' << s.images << ',' << detail::csv_metrics(s.retinal) << ','
        << detail::csv_metrics(s.reconstruction) << ',' << std::setprecision(8) << s.normalized_retinal << ','
        << s.normalized_reconstruction << '\n';
  }
}

/// One row per (image, condition).
inline void write_rows_csv(const fs::path& path, const MetricsReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "image,condition," << detail::kCsvMetricColumns << '\n';
  for (const auto& r : report.rows) {
    out << r.image << ',' << r.condition << ',' << detail::csv_metrics(r.retinal) << ','
        << detail::csv_metrics(r.reconstruction) << ',' << std::setprecision(8) << r.normalized_retinal << ','
        << r.normalized_reconstruction << '\n';
  }
}

struct EvaluateOptions {
  std::optional<PsfConfig> eval_psf;  // overrides the run's evaluation PSF
  std::optional<double> fovea_radius_deg;
  std::size_t workers = 0;
};

/// Metrics of one stored phase against its target: the retinal view goes through `psf`, both
/// views are brightness-calibrated to the target's mean before comparison.
inline ReportRow evaluate_phase(const std::string& image, const std::string& condition, const PhaseMask& phase,
                                const RealGrid& target, const PsfKernel& psf, const ViewingGeometry& geometry,
                                double fovea_radius_deg) {
  ReportRow row;
  row.image = image;
  row.condition = condition;
  row.retinal = evaluate_image(match_mean(simulate_retinal_image(phase, psf), target), target, geometry,
                               fovea_radius_deg);
  row.reconstruction =
      evaluate_image(match_mean(reconstruct_intensity(phase), target), target, geometry, fovea_radius_deg);
  return row;
}

/// Reads a run directory written by run_optimize and writes report.json, report.csv
/// (per condition) and report_rows.csv (per image and condition). The manifest is updated.
inline MetricsReport run_evaluate(const fs::path& run_dir, const EvaluateOptions& options = {}) {
  const fs::path manifest_path = run_dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw IoError(run_dir.string() + ": no manifest.json (run optimize first)");
  const ExperimentConfig config = config_from_json(read_json_file(run_dir / "config.json"));
  json manifest = read_json_file(manifest_path);

  const PsfKernel psf = build_kernel(options.eval_psf ? *options.eval_psf : config.evaluation_psf());
  const double radius = options.fovea_radius_deg ? *options.fovea_radius_deg : config.fovea_radius_deg;

  struct Entry {
    std::string image;
    std::string condition;
    fs::path dir;
  };
  std::vector<Entry> entries;
  try {
    for (const auto& j : manifest.at("jobs")) {
      entries.push_back({j.at("image").get<std::string>(), j.at("condition").get<std::string>(),
                         run_dir / j.at("dir").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw IoError(manifest_path.string() + ": malformed manifest: " + e.what());
  }

  std::vector<ReportRow> rows(entries.size());
  run_parallel(entries.size(), options.workers, [&](std::size_t k) {
    const Entry& e = entries[k];
    const RealGrid target = read_pfm(run_dir / e.image / "target.pfm");
    const RealGrid stored = read_pfm(e.dir / "phase.pfm");
    if (!stored.same_shape(target)) throw IoError(e.dir.string() + ": phase and target differ in size");
    rows[k] = evaluate_phase(e.image, e.condition, PhaseMask(stored), target, psf,
                             config.geometry(target.width(), target.height()), radius);
  });

  MetricsReport report;
  try {
    report = normalized_report(std::move(rows));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("evaluate: ") + e.what());
  }
  write_json_file(run_dir / "report.json", to_json(report));
  write_summary_csv(run_dir / "report.csv", report);
  write_rows_csv(run_dir / "report_rows.csv", report);

  Manifest files(run_dir);
  for (const auto& f : manifest.at("files")) files.add(run_dir / f.at("path").get<std::string>());
  for (const char* f : {"report.json", "report.csv", "report_rows.csv"}) files.add(run_dir / f);
  manifest["files"] = files.to_json();
  write_json_file(manifest_path, manifest);
  return report;
}

}  // namespace fovholo
