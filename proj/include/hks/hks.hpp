#pragma once

#include "hks/analysis.hpp"
#include "hks/automaton.hpp"
#include "hks/error.hpp"
#include "hks/io.hpp"
#include "hks/matcher.hpp"
#include "hks/metrics.hpp"
#include "hks/pipeline.hpp"
#include "hks/pool.hpp"
#include "hks/random.hpp"
#include "hks/selection.hpp"
#include "hks/unicode.hpp"
