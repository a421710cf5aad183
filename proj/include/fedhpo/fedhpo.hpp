#pragma once

#include "fedhpo/rng.hpp"
#include "fedhpo/search_space.hpp"
#include "fedhpo/tpe.hpp"
#include "fedhpo/dataset.hpp"
#include "fedhpo/data.hpp"
#include "fedhpo/metrics.hpp"
#include "fedhpo/models.hpp"
#include "fedhpo/fedavg.hpp"
#include "fedhpo/heuristic.hpp"
#include "fedhpo/format.hpp"
#include "fedhpo/report.hpp"
#include "fedhpo/config.hpp"
#include "fedhpo/pipeline.hpp"
