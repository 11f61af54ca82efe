#pragma once

#include "switchback/carryover.hpp"
#include "switchback/cec.hpp"
#include "switchback/cec_curve.hpp"
#include "switchback/covariance.hpp"
#include "switchback/density.hpp"
#include "switchback/design.hpp"
#include "switchback/ebdesign.hpp"
#include "switchback/effects.hpp"
#include "switchback/estimators.hpp"
#include "switchback/montecarlo.hpp"
#include "switchback/outcomes.hpp"
#include "switchback/rng.hpp"
#include "switchback/spline.hpp"
#include "switchback/stats.hpp"
