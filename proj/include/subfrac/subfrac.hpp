#pragma once

#include "subfrac/convergence.hpp"
#include "subfrac/errors.hpp"
#include "subfrac/fitting.hpp"
#include "subfrac/hyperbolic_poisson.hpp"
#include "subfrac/kernels.hpp"
#include "subfrac/manifolds.hpp"
#include "subfrac/quadrature.hpp"
#include "subfrac/report.hpp"
#include "subfrac/special_functions.hpp"
#include "subfrac/spectral.hpp"
#include "subfrac/stable.hpp"
