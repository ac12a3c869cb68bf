#pragma once

#include "mot3d/association.hpp"
#include "mot3d/core.hpp"
#include "mot3d/experiment.hpp"
#include "mot3d/hungarian.hpp"
#include "mot3d/io.hpp"
#include "mot3d/metrics.hpp"
#include "mot3d/rng.hpp"
#include "mot3d/simgen.hpp"
#include "mot3d/stats.hpp"
#include "mot3d/tracker.hpp"
#include "mot3d/trajectory.hpp"
