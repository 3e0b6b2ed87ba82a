#pragma once

#include "interp_lab/core.hpp"
#include "interp_lab/diagnostics.hpp"
#include "interp_lab/drift.hpp"
#include "interp_lab/dynamics.hpp"
#include "interp_lab/experiments.hpp"
#include "interp_lab/io.hpp"
#include "interp_lab/numerics.hpp"
#include "interp_lab/parallel.hpp"
#include "interp_lab/rng.hpp"
#include "interp_lab/schedule.hpp"
#include "interp_lab/sine_transform.hpp"
#include "interp_lab/targets.hpp"
