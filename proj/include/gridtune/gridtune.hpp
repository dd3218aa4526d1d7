#pragma once

#include "gridtune/errors.hpp"
#include "gridtune/netmodel.hpp"
#include "gridtune/spectral.hpp"
#include "gridtune/lyap.hpp"
#include "gridtune/closedform.hpp"
#include "gridtune/delay.hpp"
#include "gridtune/tuning.hpp"
#include "gridtune/sim.hpp"
#include "gridtune/csv.hpp"
#include "gridtune/svg.hpp"
#include "gridtune/config.hpp"
#include "gridtune/commands.hpp"
