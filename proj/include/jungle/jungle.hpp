#pragma once

// Umbrella header.

#include "jungle/core.hpp"
#include "jungle/exact_models.hpp"
#include "jungle/enumerate.hpp"
#include "jungle/parallel.hpp"
#include "jungle/sampler.hpp"
#include "jungle/calibration.hpp"
#include "jungle/risk.hpp"
#include "jungle/ensemble.hpp"
#include "jungle/dataio.hpp"
