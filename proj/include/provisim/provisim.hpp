#pragma once

#include "provisim/errors.hpp"
#include "provisim/matrix.hpp"
#include "provisim/noise_stats.hpp"
#include "provisim/estimators.hpp"
#include "provisim/provisioner.hpp"
#include "provisim/simcluster.hpp"
#include "provisim/scenario.hpp"
#include "provisim/trace_csv.hpp"
#include "provisim/svg.hpp"
#include "provisim/experiment.hpp"
