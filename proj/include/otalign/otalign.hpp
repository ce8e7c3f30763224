#pragma once

#include "aggregate.hpp"
#include "backtest.hpp"
#include "baselines.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "embed_io.hpp"
#include "error.hpp"
#include "exact_ot.hpp"
#include "ot.hpp"
#include "pipeline.hpp"
#include "report.hpp"
#include "ridge.hpp"
#include "scoring.hpp"
#include "synth.hpp"
