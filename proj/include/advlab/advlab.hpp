#pragma once

#include "advlab/attacks.hpp"
#include "advlab/config.hpp"
#include "advlab/dataset.hpp"
#include "advlab/errors.hpp"
#include "advlab/experiments.hpp"
#include "advlab/linalg.hpp"
#include "advlab/network.hpp"
#include "advlab/objectives.hpp"
#include "advlab/profiler.hpp"
#include "advlab/ranking.hpp"
#include "advlab/report.hpp"
#include "advlab/rng.hpp"
#include "advlab/stats.hpp"
