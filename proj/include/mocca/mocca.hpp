#pragma once

#include "mocca/csv.hpp"
#include "mocca/diagnostics.hpp"
#include "mocca/errors.hpp"
#include "mocca/experiments.hpp"
#include "mocca/families.hpp"
#include "mocca/functions.hpp"
#include "mocca/linops.hpp"
#include "mocca/prox.hpp"
#include "mocca/solver.hpp"
#include "mocca/trace.hpp"
#include "mocca/types.hpp"
