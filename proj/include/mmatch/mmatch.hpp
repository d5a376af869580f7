#pragma once

// Umbrella header for the matching-market library.

#include "mmatch/error.hpp"
#include "mmatch/market.hpp"
#include "mmatch/flow.hpp"
#include "mmatch/lp.hpp"
#include "mmatch/modularity.hpp"
#include "mmatch/sorting.hpp"
#include "mmatch/planner.hpp"
#include "mmatch/order.hpp"
#include "mmatch/logit.hpp"
#include "mmatch/association.hpp"
#include "mmatch/estimation.hpp"
#include "mmatch/io.hpp"
