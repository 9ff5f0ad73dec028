#pragma once

// Umbrella header.

#include "dprgd/baselines.hpp"
#include "dprgd/errors.hpp"
#include "dprgd/manifold.hpp"
#include "dprgd/matrix_functions.hpp"
#include "dprgd/optimizer.hpp"
#include "dprgd/privacy.hpp"
#include "dprgd/rng.hpp"
#include "dprgd/sampling.hpp"
#include "dprgd/spd.hpp"
#include "dprgd/sphere.hpp"
