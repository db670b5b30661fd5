#pragma once

#include "nonlocal_rate/config.hpp"
#include "nonlocal_rate/convergence.hpp"
#include "nonlocal_rate/energy1d.hpp"
#include "nonlocal_rate/energynd.hpp"
#include "nonlocal_rate/experiments.hpp"
#include "nonlocal_rate/fields.hpp"
#include "nonlocal_rate/functions.hpp"
#include "nonlocal_rate/integrands.hpp"
#include "nonlocal_rate/kernels.hpp"
#include "nonlocal_rate/oracles.hpp"
#include "nonlocal_rate/quadrature.hpp"
#include "nonlocal_rate/report.hpp"
