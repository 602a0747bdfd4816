#pragma once

#include "p2pinc/analytic.hpp"
#include "p2pinc/dynamics.hpp"
#include "p2pinc/experiments.hpp"
#include "p2pinc/format.hpp"
#include "p2pinc/model.hpp"
#include "p2pinc/random.hpp"
#include "p2pinc/synth.hpp"
