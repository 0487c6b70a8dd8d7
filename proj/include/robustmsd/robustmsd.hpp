#pragma once

#include "core.hpp"
#include "divergence.hpp"
#include "errors.hpp"
#include "experiments.hpp"
#include "modelrisk.hpp"
#include "numerics.hpp"
#include "random.hpp"
#include "sampling.hpp"
#include "skew_normal.hpp"
#include "solver.hpp"
