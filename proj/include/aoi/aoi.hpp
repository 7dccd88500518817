#pragma once

#include "aoi/closed_forms.hpp"
#include "aoi/limits.hpp"
#include "aoi/model.hpp"
#include "aoi/slot_sim.hpp"
#include "aoi/state_calculus.hpp"
