#pragma once

#include "tdep/analytic_models.hpp"
#include "tdep/asymptotics.hpp"
#include "tdep/concurrency.hpp"
#include "tdep/copula_core.hpp"
#include "tdep/csv.hpp"
#include "tdep/error.hpp"
#include "tdep/mc_lab.hpp"
#include "tdep/network.hpp"
#include "tdep/normal.hpp"
#include "tdep/ocean_pipeline.hpp"
#include "tdep/rng.hpp"
#include "tdep/samplers.hpp"
#include "tdep/skew_t.hpp"
#include "tdep/tcte.hpp"

namespace tdep {
inline constexpr const char* version = "0.1.0";
}
