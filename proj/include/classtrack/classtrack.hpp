#pragma once

#include "classtrack/config.hpp"
#include "classtrack/dedup.hpp"
#include "classtrack/evaluator.hpp"
#include "classtrack/ingest.hpp"
#include "classtrack/matcher.hpp"
#include "classtrack/pipeline.hpp"
#include "classtrack/seatmap.hpp"
#include "classtrack/service.hpp"
#include "classtrack/simulator.hpp"
#include "classtrack/tracker.hpp"
#include "classtrack/types.hpp"
