#pragma once

// Umbrella header.

#include "hbe/config.hpp"
#include "hbe/core_model.hpp"
#include "hbe/degradation.hpp"
#include "hbe/hdr_sve.hpp"
#include "hbe/image.hpp"
#include "hbe/init_oracle.hpp"
#include "hbe/io.hpp"
#include "hbe/linalg.hpp"
#include "hbe/metrics.hpp"
#include "hbe/parallel.hpp"
#include "hbe/patch_engine.hpp"
#include "hbe/random.hpp"
#include "hbe/solver.hpp"
#include "hbe/synthetic.hpp"
#include "hbe/types.hpp"
