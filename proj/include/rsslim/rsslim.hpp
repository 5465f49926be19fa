#pragma once

#include "rsslim/errors.hpp"
#include "rsslim/geometry.hpp"
#include "rsslim/propagation.hpp"
#include "rsslim/correlation.hpp"
#include "rsslim/random.hpp"
#include "rsslim/noisegen.hpp"
#include "rsslim/estimator.hpp"
#include "rsslim/bounds.hpp"
#include "rsslim/analysis.hpp"
#include "rsslim/config.hpp"
#include "rsslim/csv.hpp"
#include "rsslim/plots.hpp"
#include "rsslim/app.hpp"
