// Retinal speckle from a coherent PSF: the same target amplitude carried with random versus
// uniform phase, convolved with a Gaussian eye PSF.
//
//   speckle_demo [target.png] [out_dir]

#include <cstdio>
#include <string>

#include "fovholo/fovholo.hpp"

using namespace fovholo;

static double contrast(const RealGrid& img) {
  const double m = mean(img);
  double var = 0.0;
  for (double v : img) var += (v - m) * (v - m);
  return std::sqrt(var / static_cast<double>(img.size())) / m;
}

int main(int argc, char** argv) {
  const fs::path target_path = argc > 1 ? argv[1] : "data/images/checkerboard.png";
  const fs::path out = argc > 2 ? argv[2] : "speckle_demo";
  fs::create_directories(out);

  const RealGrid target = resize_area(read_png_gray(target_path), 256, 256);
  const PsfKernel psf = gaussian_kernel(0.6);
  const PhaseMask noise = random_phase(target.width(), target.height(), 7);

  ComplexGrid smooth(target.width(), target.height());
  ComplexGrid speckled(target.width(), target.height());
  for (std::size_t i = 0; i < target.size(); ++i) {
    smooth[i] = std::sqrt(target[i]);
    speckled[i] = std::polar(std::sqrt(target[i]), noise[i]);
  }
  const RealGrid blurred = intensity(convolve(smooth, psf));
  const RealGrid speckle = intensity(convolve(speckled, psf));

  write_gray8_png(out / "uniform_phase.png", match_mean(blurred, target));
  write_gray8_png(out / "random_phase.png", match_mean(speckle, target));
  std::printf("intensity contrast  target %.3f  uniform phase %.3f  random phase %.3f\n", contrast(target),
              contrast(blurred), contrast(speckle));
  std::printf("PSNR vs target      uniform phase %.2f dB  random phase %.2f dB\n",
              psnr(match_mean(blurred, target), target), psnr(match_mean(speckle, target), target));
  return 0;
}
