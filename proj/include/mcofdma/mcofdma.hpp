#pragma once

#include "mcofdma/bounds.hpp"
#include "mcofdma/chanmodel.hpp"
#include "mcofdma/distopt.hpp"
#include "mcofdma/error.hpp"
#include "mcofdma/gp/posynomial.hpp"
#include "mcofdma/gp/power.hpp"
#include "mcofdma/gp/solver.hpp"
#include "mcofdma/harness.hpp"
#include "mcofdma/instances.hpp"
#include "mcofdma/json_io.hpp"
#include "mcofdma/model.hpp"
#include "mcofdma/optimal.hpp"
#include "mcofdma/random.hpp"
#include "mcofdma/schemes.hpp"
