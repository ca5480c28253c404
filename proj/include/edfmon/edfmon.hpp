#pragma once

#include "edfmon/asymptotic_regression.hpp"
#include "edfmon/calibrate.hpp"
#include "edfmon/copula.hpp"
#include "edfmon/detector.hpp"
#include "edfmon/distributions.hpp"
#include "edfmon/errors.hpp"
#include "edfmon/experiments.hpp"
#include "edfmon/genmodels.hpp"
#include "edfmon/io.hpp"
#include "edfmon/lrcov.hpp"
#include "edfmon/matrix.hpp"
#include "edfmon/parallel.hpp"
#include "edfmon/points.hpp"
#include "edfmon/rng.hpp"
