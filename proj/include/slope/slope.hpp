#pragma once

// Everything in one include.

#include "slope/errors.hpp"
#include "slope/normal.hpp"
#include "slope/rng.hpp"
#include "slope/parallel.hpp"
#include "slope/sorted_l1.hpp"
#include "slope/linear_operator.hpp"
#include "slope/solver.hpp"
#include "slope/lambda_seq.hpp"
#include "slope/inference.hpp"
#include "slope/amp.hpp"
#include "slope/design.hpp"
#include "slope/signal.hpp"
#include "slope/experiment.hpp"
#include "slope/io.hpp"
#include "slope/config.hpp"
#include "slope/version.hpp"
