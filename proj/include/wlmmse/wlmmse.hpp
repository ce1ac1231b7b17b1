#pragma once

// Umbrella header.

#include "wlmmse/errors.hpp"
#include "wlmmse/numerics.hpp"
#include "wlmmse/spectra.hpp"
#include "wlmmse/scenario.hpp"
#include "wlmmse/link_model.hpp"
#include "wlmmse/receiver.hpp"
#include "wlmmse/transmitter.hpp"
#include "wlmmse/optimize.hpp"
#include "wlmmse/random_scenario.hpp"
#include "wlmmse/scenario_json.hpp"
#include "wlmmse/simulate.hpp"

namespace wlmmse {
inline constexpr const char* version = "1.0.0";
}
