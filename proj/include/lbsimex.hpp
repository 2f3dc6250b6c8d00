#pragma once

#include "lbsimex/cohort.hpp"
#include "lbsimex/csv.hpp"
#include "lbsimex/datagen.hpp"
#include "lbsimex/errors.hpp"
#include "lbsimex/estimator.hpp"
#include "lbsimex/harness.hpp"
#include "lbsimex/km.hpp"
#include "lbsimex/link.hpp"
#include "lbsimex/monotone.hpp"
#include "lbsimex/parallel.hpp"
#include "lbsimex/report.hpp"
#include "lbsimex/rng.hpp"
#include "lbsimex/simex.hpp"
