#pragma once

#include "dhlab/core.hpp"
#include "dhlab/rng.hpp"
#include "dhlab/sample_space.hpp"
#include "dhlab/torus_phase.hpp"
#include "dhlab/orbit_solver.hpp"
#include "dhlab/ensemble.hpp"
#include "dhlab/floer_continuation.hpp"
#include "dhlab/measure_lab.hpp"
#include "dhlab/fokker_planck.hpp"
#include "dhlab/io.hpp"
#include "dhlab/experiment.hpp"
