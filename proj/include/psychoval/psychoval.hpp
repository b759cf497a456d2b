#pragma once

#include "psychoval/errors.hpp"
#include "psychoval/matrix.hpp"
#include "psychoval/core_stats.hpp"
#include "psychoval/ingest.hpp"
#include "psychoval/reliability.hpp"
#include "psychoval/adequacy.hpp"
#include "psychoval/efa.hpp"
#include "psychoval/simulate.hpp"
#include "psychoval/pipeline.hpp"
#include "psychoval/report_io.hpp"
