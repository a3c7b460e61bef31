#pragma once

// Hologram synthesis: Gerchberg-Saxton and first-order optimization of a
// retina-aware loss under the four experimental conditions
//
//                    PSF speckle   foveation
//   baseline             no           no
//   foveation_only       no           yes
//   psf_only             yes          no
//   ours                 yes          yes

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fovholo/errors.hpp"
#include "fovholo/fft.hpp"
#include "fovholo/grid.hpp"
#include "fovholo/psf.hpp"
#include "fovholo/retina.hpp"
#include "fovholo/wavefield.hpp"

namespace fovholo {

enum class Condition { baseline, foveation_only, psf_only, ours };
enum class ErrorDomain { intensity, amplitude };

inline bool uses_psf(Condition c) { return c == Condition::psf_only || c == Condition::ours; }
inline bool uses_foveation(Condition c) { return c == Condition::foveation_only || c == Condition::ours; }

inline std::string to_string(Condition c) {
  switch (c) {
    case Condition::baseline: return "baseline";
    case Condition::foveation_only: return "foveation_only";
    case Condition::psf_only: return "psf_only";
    case Condition::ours: return "ours";
  }
  return "?";
}

inline Condition parse_condition(const std::string& name) {
  if (name == "baseline") return Condition::baseline;
  if (name == "foveation_only" || name == "foveation-only") return Condition::foveation_only;
  if (name == "psf_only" || name == "psf-only") return Condition::psf_only;
  if (name == "ours") return Condition::ours;
  throw ConfigError("unknown condition '" + name + "' (expected baseline, foveation_only, psf_only or ours)");
}

inline std::string to_string(ErrorDomain d) { return d == ErrorDomain::intensity ? "intensity" : "amplitude"; }

inline ErrorDomain parse_error_domain(const std::string& name) {
  if (name == "intensity") return ErrorDomain::intensity;
  if (name == "amplitude") return ErrorDomain::amplitude;
  throw ConfigError("unknown error domain '" + name + "' (expected intensity or amplitude)");
}

struct LossSpec {
  Condition condition = Condition::baseline;
  std::optional<PsfKernel> psf;
  std::optional<FoveationMask> mask;
  ErrorDomain error_domain = ErrorDomain::intensity;
  double illumination = 1.0;   // SLM illumination amplitude
  bool intensity_psf = false;  // ablation: blur |U_I|^2 instead of U_I

  /// psf present iff the condition models speckle; mask present iff it models foveation.
  void validate() const {
    if (uses_psf(condition) != psf.has_value()) {
      detail::fail("loss spec: condition " + to_string(condition) +
                   (psf ? " must not carry a PSF" : " requires a PSF kernel"));
    }
    if (uses_foveation(condition) != mask.has_value()) {
      detail::fail("loss spec: condition " + to_string(condition) +
                   (mask ? " must not carry a foveation mask" : " requires a foveation mask"));
    }
    detail::require(illumination > 0.0 && std::isfinite(illumination), "loss spec: illumination must be positive");
  }
};

inline LossSpec make_loss_spec(Condition condition, const PsfKernel& psf, const FoveationMask& mask,
                               ErrorDomain domain = ErrorDomain::intensity) {
  LossSpec spec;
  spec.condition = condition;
  spec.error_domain = domain;
  if (uses_psf(condition)) spec.psf = psf;
  if (uses_foveation(condition)) spec.mask = mask;
  return spec;
}

/// Illumination amplitude under which the modelled image can carry the target's energy.
/// A phase-only SLM has a flat spectrum, so a coherent PSF passes only sum(taps^2) of it.
inline double matched_illumination(const RealGrid& target, const LossSpec& spec) {
  double transmission = 1.0;
  if (spec.psf && !spec.intensity_psf) transmission = spec.psf->energy_transmission();
  const double m = mean(target);
  detail::require(m > 0.0, "matched_illumination: target is all zero");
  return std::sqrt(m / transmission);
}

// ---------------------------------------------------------------------------
// Loss and its gradient

/// L = mean over pixels of w * e^2, where e compares the modelled retinal image with the
/// target (intensity or amplitude), w is the foveation mask or 1.
///
/// The gradient follows the forward chain in reverse:
///   dL/dR -> dL/dv* (v = retinal field) -> correlate with kernel -> inverse transform
///   -> dL/dphi = -2 Im(conj(g) * U_H).
class PerceptualLoss {
 public:
  PerceptualLoss(RealGrid target, LossSpec spec)
      : target_(std::move(target)), spec_(std::move(spec)), fft_(target_.width(), target_.height()) {
    spec_.validate();
    for (double t : target_) {
      detail::require(std::isfinite(t) && t >= 0.0, "loss: target must be finite and non-negative");
    }
    if (spec_.mask) require_same_shape(*spec_.mask, target_, "loss: mask vs target");
    if (spec_.psf) {
      detail::require(spec_.psf->side() <= target_.width() && spec_.psf->side() <= target_.height(),
                      "loss: kernel larger than field");
    }
    target_amplitude_ = RealGrid(target_.width(), target_.height());
    for (std::size_t i = 0; i < target_.size(); ++i) target_amplitude_[i] = std::sqrt(target_[i]);
    const std::size_t w = target_.width();
    const std::size_t h = target_.height();
    hologram_ = ComplexGrid(w, h);
    image_ = ComplexGrid(w, h);
    upstream_ = ComplexGrid(w, h);
  }

  const LossSpec& spec() const noexcept { return spec_; }
  const RealGrid& target() const noexcept { return target_; }

  double value(const PhaseMask& phase) { return evaluate(phase, nullptr); }

  double value_and_gradient(const PhaseMask& phase, RealGrid& gradient) {
    if (!gradient.same_shape(target_)) gradient = RealGrid(target_.width(), target_.height());
    return evaluate(phase, &gradient);
  }

  /// Modelled retinal intensity for the given phase (the R compared against the target).
  RealGrid retinal_image(const PhaseMask& phase) {
    forward(phase);
    return modelled_;
  }

 private:
  double weight(std::size_t i) const { return spec_.mask ? (*spec_.mask)[i] : 1.0; }

  void forward(const PhaseMask& phase) {
    require_same_shape(phase, target_, "loss: phase vs target");
    for (std::size_t i = 0; i < phase.size(); ++i) hologram_[i] = std::polar(spec_.illumination, phase[i]);
    fft_.forward(hologram_.data(), image_.data());
    if (spec_.psf && !spec_.intensity_psf) {
      retina_ = convolve(image_, *spec_.psf);
      modelled_ = intensity(retina_);
    } else if (spec_.psf) {
      modelled_ = convolve(intensity(image_), *spec_.psf);
    } else {
      modelled_ = intensity(image_);
    }
  }

  double evaluate(const PhaseMask& phase, RealGrid* gradient) {
    forward(phase);
    const std::size_t n = target_.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    const bool amplitude = spec_.error_domain == ErrorDomain::amplitude;

    // dL/dR per pixel (R = modelled intensity)
    RealGrid d_intensity(target_.width(), target_.height());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = weight(i);
      if (amplitude) {
        const double a = std::sqrt(modelled_[i]);
        const double e = a - target_amplitude_[i];
        total += w * e * e;
        // d(sqrt R)/dR = 1 / (2 sqrt R); zero-amplitude pixels take the zero subgradient
        d_intensity[i] = a > 0.0 ? inv_n * w * e / a : 0.0;
      } else {
        const double e = modelled_[i] - target_[i];
        total += w * e * e;
        d_intensity[i] = 2.0 * inv_n * w * e;
      }
    }
    const double value = total * inv_n;
    if (gradient == nullptr) return value;

    // dL/dU_I* where U_I is the image-plane field
    if (spec_.psf && !spec_.intensity_psf) {
      ComplexGrid d_retina(target_.width(), target_.height());
      for (std::size_t i = 0; i < n; ++i) d_retina[i] = d_intensity[i] * retina_[i];
      upstream_ = correlate(d_retina, *spec_.psf);
    } else if (spec_.psf) {
      const RealGrid d_image_intensity = correlate(d_intensity, *spec_.psf);
      for (std::size_t i = 0; i < n; ++i) upstream_[i] = d_image_intensity[i] * image_[i];
    } else {
      for (std::size_t i = 0; i < n; ++i) upstream_[i] = d_intensity[i] * image_[i];
    }
    // adjoint of the unitary transform, then the phase-only modulation
    fft_.inverse(upstream_.data(), upstream_.data());
    for (std::size_t i = 0; i < n; ++i) {
      (*gradient)[i] = -2.0 * std::imag(std::conj(upstream_[i]) * hologram_[i]);
    }
    return value;
  }

  RealGrid target_;
  RealGrid target_amplitude_;
  LossSpec spec_;
  CenteredFft2d fft_;
  ComplexGrid hologram_;
  ComplexGrid image_;
  ComplexGrid retina_;
  ComplexGrid upstream_;
  RealGrid modelled_;
};

inline double loss(const PhaseMask& phase, const RealGrid& target, const LossSpec& spec) {
  return PerceptualLoss(target, spec).value(phase);
}

inline RealGrid loss_gradient(const PhaseMask& phase, const RealGrid& target, const LossSpec& spec) {
  RealGrid gradient;
  PerceptualLoss(target, spec).value_and_gradient(phase, gradient);
  return gradient;
}

// ---------------------------------------------------------------------------
// Forward simulation

/// |F(a * exp(j phase))|^2: the reconstruction on the image plane, without the eye.
inline RealGrid reconstruct_intensity(const PhaseMask& phase, double illumination = 1.0) {
  return intensity(propagate_fourier(make_hologram_field(phase, Optics{}, illumination)));
}

/// Perceived image: image-plane field convolved with the retinal PSF, then squared.
inline RealGrid simulate_retinal_image(const PhaseMask& phase, const PsfKernel& psf, double illumination = 1.0) {
  const ComplexField image = propagate_fourier(make_hologram_field(phase, Optics{}, illumination));
  return intensity(apply_retinal_psf(image, psf));
}

// ---------------------------------------------------------------------------
// Random initialization

/// Uniform phase in [0, 2*pi) from a 64-bit seed. The draw uses the raw mt19937_64 stream
/// (53-bit mantissa) so it is identical across standard libraries.
inline PhaseMask random_phase(std::size_t width, std::size_t height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PhaseMask phase(width, height);
  for (double& v : phase) v = static_cast<double>(rng() >> 11) * 0x1.0p-53 * kTwoPi;
  return phase;
}

// ---------------------------------------------------------------------------
// Gerchberg-Saxton

struct GsConfig {
  std::size_t iterations = 200;
  std::uint64_t seed = 0;
  bool zero_init = false;
};

struct GsResult {
  PhaseMask phase;
  // RMS of |U_I| - A measured at the start of each iteration, before the image-plane projection
  std::vector<double> amplitude_error;
  double final_error = 0.0;  // same measure for the returned phase
};

/// Alternating projections between unit amplitude on the SLM and the target amplitude
/// A = s * sqrt(target) on the image plane, with s chosen so that sum(A^2) equals the
/// SLM energy (one per pixel).
inline GsResult gerchberg_saxton(const RealGrid& target, const GsConfig& config = {}) {
  double total = 0.0;
  for (double t : target) {
    detail::require(std::isfinite(t) && t >= 0.0, "gerchberg_saxton: target must be non-negative");
    total += t;
  }
  detail::require(total > 0.0, "gerchberg_saxton: target is all zero");
  const std::size_t n = target.size();
  const double scale = std::sqrt(static_cast<double>(n) / total);
  RealGrid amplitude(target.width(), target.height());
  for (std::size_t i = 0; i < n; ++i) amplitude[i] = scale * std::sqrt(target[i]);

  GsResult result;
  result.phase = config.zero_init ? PhaseMask(target.width(), target.height(), 0.0)
                                  : random_phase(target.width(), target.height(), config.seed);
  CenteredFft2d fft(target.width(), target.height());
  ComplexGrid field(target.width(), target.height());

  auto image_error = [&](const ComplexGrid& image) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::abs(image[i]) - amplitude[i];
      acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(n));
  };

  for (std::size_t it = 0; it < config.iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) field[i] = std::polar(1.0, result.phase[i]);
    fft.forward(field.data(), field.data());
    result.amplitude_error.push_back(image_error(field));
    for (std::size_t i = 0; i < n; ++i) {
      const double mag = std::abs(field[i]);
      field[i] = mag > 0.0 ? field[i] * (amplitude[i] / mag) : Complex(amplitude[i], 0.0);
    }
    fft.inverse(field.data(), field.data());
    for (std::size_t i = 0; i < n; ++i) result.phase[i] = std::arg(field[i]);
  }
  for (std::size_t i = 0; i < n; ++i) field[i] = std::polar(1.0, result.phase[i]);
  fft.forward(field.data(), field.data());
  result.final_error = image_error(field);
  return result;
}

// ---------------------------------------------------------------------------
// Gradient-based optimization

enum class UpdateRule { adam, gradient_descent };

struct OptimizerConfig {
  std::size_t iterations = 1000;  // parameter updates; 0 only evaluates the initial phase
  double step_size = 0.05;
  std::uint64_t seed = 0;
  double stop_tolerance = 0.0;  // stop when |dL| <= tol * L between iterations; 0 disables
  std::optional<int> quantize_bits;
  UpdateRule rule = UpdateRule::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    detail::require(step_size > 0.0 && std::isfinite(step_size), "optimizer: step size must be positive");
    detail::require(stop_tolerance >= 0.0, "optimizer: stop tolerance must be non-negative");
    detail::require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "optimizer: betas must be in [0, 1)");
    if (quantize_bits) {
      detail::require(*quantize_bits >= 1 && *quantize_bits <= 16, "optimizer: quantize bits must be in [1, 16]");
    }
  }
};

struct OptimizationTrace {
  std::vector<double> loss;     // loss of iterate k; entry 0 is the initial phase
  std::vector<double> seconds;  // wall-clock spent producing entry k
  std::size_t best_iteration = 0;
  bool stopped_early = false;
};

struct OptimizationResult {
  PhaseMask phase;  // best-loss iterate
  double best_loss = 0.0;
  OptimizationTrace trace;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, OptimizationTrace trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const OptimizationTrace& trace() const noexcept { return trace_; }

 private:
  OptimizationTrace trace_;
};

/// Minimizes the loss from `initial` (or a seeded uniform random phase).
///
/// Update rule (adam, per SLM pixel, t = 1, 2, ...):
///   m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2
///   phi -= step * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// gradient_descent is phi -= step * g. With quantize_bits set, the loss and gradient are
/// evaluated on the wrapped, quantized phase while updates accumulate on the continuous one.
inline OptimizationResult optimize(const RealGrid& target, const LossSpec& spec, const OptimizerConfig& config,
                                   std::optional<PhaseMask> initial = std::nullopt) {
  config.validate();
  PerceptualLoss objective(target, spec);
  PhaseMask latent = initial ? std::move(*initial) : random_phase(target.width(), target.height(), config.seed);
  require_same_shape(latent, target, "optimize: initial phase vs target");

  const std::size_t n = target.size();
  std::vector<double> m(n, 0.0);
  std::vector<double> v(n, 0.0);
  RealGrid gradient(target.width(), target.height());

  OptimizationResult result;
  result.best_loss = std::numeric_limits<double>::infinity();
  double b1t = 1.0;
  double b2t = 1.0;
  using clock = std::chrono::steady_clock;

  for (std::size_t k = 0;; ++k) {
    const auto start = clock::now();
    PhaseMask evaluated = config.quantize_bits ? wrap_quantize_phase(latent, *config.quantize_bits) : latent;
    const double value = objective.value_and_gradient(evaluated, gradient);
    if (!std::isfinite(value)) {
      result.trace.seconds.push_back(std::chrono::duration<double>(clock::now() - start).count());
      result.trace.loss.push_back(value);
      throw DivergenceError("optimize: loss became non-finite at iteration " + std::to_string(k), result.trace);
    }
    result.trace.loss.push_back(value);
    if (value < result.best_loss) {
      result.best_loss = value;
      result.phase = evaluated;
      result.trace.best_iteration = k;
    }
    if (k == config.iterations) {
      result.trace.seconds.push_back(std::chrono::duration<double>(clock::now() - start).count());
      break;
    }
    if (config.stop_tolerance > 0.0 && k > 0) {
      const double previous = result.trace.loss[k - 1];
      if (std::abs(previous - value) <= config.stop_tolerance * std::abs(previous)) {
        result.trace.stopped_early = true;
        result.trace.seconds.push_back(std::chrono::duration<double>(clock::now() - start).count());
        break;
      }
    }

    if (config.rule == UpdateRule::gradient_descent) {
      for (std::size_t i = 0; i < n; ++i) latent[i] -= config.step_size * gradient[i];
    } else {
      b1t *= config.beta1;
      b2t *= config.beta2;
      for (std::size_t i = 0; i < n; ++i) {
        const double g = gradient[i];
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
        const double mhat = m[i] / (1.0 - b1t);
        const double vhat = v[i] / (1.0 - b2t);
        latent[i] -= config.step_size * mhat / (std::sqrt(vhat) + config.epsilon);
      }
    }
    result.trace.seconds.push_back(std::chrono::duration<double>(clock::now() - start).count());
  }
  return result;
}

}  // namespace fovholo
