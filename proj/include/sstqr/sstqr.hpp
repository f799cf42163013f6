#pragma once

// Umbrella header for the spatio-temporal simultaneous quantile regression
// library: monotone B-spline quantile surfaces smoothed over space, exact
// likelihood evaluation, block Metropolis-Hastings posterior sampling,
// simplex coordinate-descent ML fitting, and the synthetic benchmark harness.

#include "sstqr/bspline.hpp"
#include "sstqr/data.hpp"
#include "sstqr/data_io.hpp"
#include "sstqr/errors.hpp"
#include "sstqr/likelihood.hpp"
#include "sstqr/model.hpp"
#include "sstqr/numeric.hpp"
#include "sstqr/optimizer.hpp"
#include "sstqr/sampler.hpp"
#include "sstqr/simulation.hpp"
