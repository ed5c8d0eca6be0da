#pragma once

// Umbrella header.

#include "mfq/config.hpp"
#include "mfq/diagnostics.hpp"
#include "mfq/errors.hpp"
#include "mfq/evaluation.hpp"
#include "mfq/experiment.hpp"
#include "mfq/jump_models.hpp"
#include "mfq/mean_flow.hpp"
#include "mfq/model.hpp"
#include "mfq/mv_model.hpp"
#include "mfq/numerics.hpp"
#include "mfq/oracles.hpp"
#include "mfq/params.hpp"
#include "mfq/policy.hpp"
#include "mfq/population.hpp"
#include "mfq/presets.hpp"
#include "mfq/trainer.hpp"
