#pragma once

// Umbrella header: chains with long memory over finite alphabets, maximal
// couplings, the dominating reset chain and its renewal analysis, and upper
// bounds on the decay of correlations.

#include "mixlab/alphabet.hpp"
#include "mixlab/bounds.hpp"
#include "mixlab/chain.hpp"
#include "mixlab/context.hpp"
#include "mixlab/coupling.hpp"
#include "mixlab/gamma.hpp"
#include "mixlab/numeric.hpp"
#include "mixlab/potential.hpp"
#include "mixlab/renewal.hpp"
#include "mixlab/rng.hpp"
#include "mixlab/schedule.hpp"
#include "mixlab/variations.hpp"
