#pragma once

#include "hk/common.hpp"
#include "hk/cone.hpp"
#include "hk/convexity.hpp"
#include "hk/geodesic.hpp"
#include "hk/grid.hpp"
#include "hk/hopf_lax.hpp"
#include "hk/io.hpp"
#include "hk/let.hpp"
#include "hk/measure.hpp"
#include "hk/potentials.hpp"
