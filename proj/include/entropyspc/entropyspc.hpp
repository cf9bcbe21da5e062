#pragma once

#include "entropyspc/arl_sim.hpp"
#include "entropyspc/config.hpp"
#include "entropyspc/error.hpp"
#include "entropyspc/estimators.hpp"
#include "entropyspc/fdist.hpp"
#include "entropyspc/io.hpp"
#include "entropyspc/maxent.hpp"
#include "entropyspc/monitoring.hpp"
#include "entropyspc/profile_data.hpp"
#include "entropyspc/quadrature.hpp"
#include "entropyspc/rng.hpp"
#include "entropyspc/svg.hpp"
