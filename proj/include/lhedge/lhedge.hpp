#pragma once

#include "lhedge/errors.hpp"
#include "lhedge/params.hpp"
#include "lhedge/scenario.hpp"
#include "lhedge/quadrature.hpp"
#include "lhedge/affine.hpp"
#include "lhedge/riccati.hpp"
#include "lhedge/replication.hpp"
#include "lhedge/strategy.hpp"
#include "lhedge/montecarlo.hpp"
#include "lhedge/experiments.hpp"
