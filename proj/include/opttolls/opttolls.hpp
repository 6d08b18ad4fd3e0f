#pragma once

#include "opttolls/ellipsoid.hpp"
#include "opttolls/equilibrium.hpp"
#include "opttolls/errors.hpp"
#include "opttolls/experiments.hpp"
#include "opttolls/game.hpp"
#include "opttolls/graph.hpp"
#include "opttolls/instances.hpp"
#include "opttolls/io.hpp"
#include "opttolls/oracle.hpp"
#include "opttolls/polytope.hpp"
#include "opttolls/toll_inference.hpp"
#include "opttolls/zero_order.hpp"
