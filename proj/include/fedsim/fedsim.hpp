#pragma once

#include "fedsim/config.hpp"
#include "fedsim/cost.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/experiment.hpp"
#include "fedsim/flcore.hpp"
#include "fedsim/model.hpp"
#include "fedsim/overheads.hpp"
#include "fedsim/population.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/trace_io.hpp"
#include "fedsim/tuner.hpp"
