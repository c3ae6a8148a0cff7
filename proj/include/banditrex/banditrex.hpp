#pragma once

// Umbrella header for the banditrex library.

#include "banditrex/csv.hpp"
#include "banditrex/data_io.hpp"
#include "banditrex/domain.hpp"
#include "banditrex/errors.hpp"
#include "banditrex/evaluation.hpp"
#include "banditrex/experiment.hpp"
#include "banditrex/features.hpp"
#include "banditrex/interaction_log.hpp"
#include "banditrex/parallel.hpp"
#include "banditrex/policies.hpp"
#include "banditrex/reward_model.hpp"
#include "banditrex/rng.hpp"
#include "banditrex/selector.hpp"
#include "banditrex/simdata.hpp"
