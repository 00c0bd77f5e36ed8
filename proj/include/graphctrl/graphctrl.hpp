#pragma once

#include "graphctrl/bfield.hpp"
#include "graphctrl/dynamics.hpp"
#include "graphctrl/families.hpp"
#include "graphctrl/graph.hpp"
#include "graphctrl/lie.hpp"
#include "graphctrl/lowerbounds.hpp"
#include "graphctrl/moment.hpp"
#include "graphctrl/polynomial.hpp"
#include "graphctrl/problem.hpp"
#include "graphctrl/spectrum.hpp"
#include "graphctrl/trig_integral.hpp"
