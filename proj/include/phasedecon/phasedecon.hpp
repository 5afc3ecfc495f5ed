#pragma once

#include "errors.hpp"
#include "numerics.hpp"
#include "random.hpp"
#include "model.hpp"
#include "ecf.hpp"
#include "weights.hpp"
#include "phasefit.hpp"
#include "density.hpp"
#include "bandwidth.hpp"
#include "metrics.hpp"
#include "simulation.hpp"
#include "io.hpp"
#include "commands.hpp"
