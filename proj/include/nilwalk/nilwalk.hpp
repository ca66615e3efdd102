#pragma once

#include "nilwalk/algebra.hpp"
#include "nilwalk/analysis.hpp"
#include "nilwalk/errors.hpp"
#include "nilwalk/graph.hpp"
#include "nilwalk/group.hpp"
#include "nilwalk/harmonic.hpp"
#include "nilwalk/rng.hpp"
#include "nilwalk/simulate.hpp"
#include "nilwalk/stats.hpp"
#include "nilwalk/version.hpp"
