#pragma once

// Umbrella header.

#include "mamt/error.hpp"
#include "mamt/env/make_env.hpp"
#include "mamt/divergence/oracles.hpp"
#include "mamt/nets/critic.hpp"
#include "mamt/nets/modeling.hpp"
#include "mamt/nets/snapshot.hpp"
#include "mamt/mamd/losses.hpp"
#include "mamt/coord/coordination.hpp"
#include "mamt/ns/signal.hpp"
#include "mamt/trdn/network.hpp"
#include "mamt/bilevel/bilevel.hpp"
#include "mamt/harness/dilemma.hpp"
#include "mamt/harness/plots.hpp"
