#pragma once

// Diffusion sampling and inversion-free editing toolkit: schedules, analytic
// GMM denoisers, DDPM/DDIM/consistency-style samplers, the VCI/ControlVCI
// editing loop with its SDEdit and DDIM-inversion baselines, metric kernels,
// and the sweep/bench harness.

#include "vci/config.hpp"
#include "vci/denoiser.hpp"
#include "vci/editor.hpp"
#include "vci/errors.hpp"
#include "vci/gmm.hpp"
#include "vci/metrics.hpp"
#include "vci/rng.hpp"
#include "vci/sample.hpp"
#include "vci/sampler.hpp"
#include "vci/schedule.hpp"
#include "vci/sweep.hpp"
#include "vci/tensor_io.hpp"
