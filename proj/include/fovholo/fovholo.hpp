#pragma once

// Umbrella header.

#include "fovholo/errors.hpp"
#include "fovholo/grid.hpp"
#include "fovholo/fft.hpp"
#include "fovholo/wavefield.hpp"
#include "fovholo/psf.hpp"
#include "fovholo/retina.hpp"
#include "fovholo/phase_retrieval.hpp"
#include "fovholo/metrics.hpp"
#include "fovholo/io.hpp"
#include "fovholo/experiment.hpp"
