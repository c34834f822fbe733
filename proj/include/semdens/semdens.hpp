#pragma once

#include "semdens/baselines.hpp"
#include "semdens/density.hpp"
#include "semdens/geometry.hpp"
#include "semdens/harness.hpp"
#include "semdens/pipeline.hpp"
#include "semdens/ranking.hpp"
#include "semdens/record.hpp"
#include "semdens/report.hpp"
#include "semdens/rouge.hpp"
#include "semdens/scoring.hpp"
#include "semdens/ttest.hpp"
