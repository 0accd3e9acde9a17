#pragma once

// Umbrella header: the whole continual-learning toolkit.

#include "madar/core.hpp"
#include "madar/rng.hpp"
#include "madar/stream_synth.hpp"
#include "madar/dataset_io.hpp"
#include "madar/isolation_forest.hpp"
#include "madar/mlp.hpp"
#include "madar/replay.hpp"
#include "madar/metrics.hpp"
#include "madar/scenario.hpp"
#include "madar/experiment.hpp"
