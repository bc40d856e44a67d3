#pragma once

#include "cellsim/agent.hpp"
#include "cellsim/baselines.hpp"
#include "cellsim/config.hpp"
#include "cellsim/core.hpp"
#include "cellsim/engine.hpp"
#include "cellsim/mobility.hpp"
#include "cellsim/output.hpp"
#include "cellsim/policy_clb.hpp"
#include "cellsim/policy_dlb.hpp"
#include "cellsim/radio.hpp"
#include "cellsim/rng.hpp"
#include "cellsim/signaling.hpp"
#include "cellsim/topology.hpp"
