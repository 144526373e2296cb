#pragma once

#include "spen/ball_quadratic.hpp"
#include "spen/brute_force.hpp"
#include "spen/config.hpp"
#include "spen/core.hpp"
#include "spen/harness.hpp"
#include "spen/penalty.hpp"
#include "spen/problem.hpp"
#include "spen/problems.hpp"
#include "spen/prox.hpp"
#include "spen/random.hpp"
#include "spen/sfo_solver.hpp"
#include "spen/stats.hpp"
#include "spen/szo_solver.hpp"
#include "spen/validate.hpp"
