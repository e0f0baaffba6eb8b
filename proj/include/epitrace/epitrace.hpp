#pragma once

#include "epitrace/types.hpp"
#include "epitrace/codec.hpp"
#include "epitrace/ledger.hpp"
#include "epitrace/contracts.hpp"
#include "epitrace/proximity.hpp"
#include "epitrace/health.hpp"
#include "epitrace/irls.hpp"
#include "epitrace/exposure.hpp"
#include "epitrace/sim/config.hpp"
#include "epitrace/sim/events.hpp"
#include "epitrace/sim/scenario.hpp"
#include "epitrace/sim/stats.hpp"
#include "epitrace/sim/cost.hpp"
#include "epitrace/cli.hpp"
