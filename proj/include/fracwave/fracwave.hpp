#pragma once

#include "fracwave/errors.hpp"
#include "fracwave/evolution.hpp"
#include "fracwave/grid.hpp"
#include "fracwave/operators.hpp"
#include "fracwave/scenario_io.hpp"
#include "fracwave/step_solver.hpp"
#include "fracwave/verification.hpp"
