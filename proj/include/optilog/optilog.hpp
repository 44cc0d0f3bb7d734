#ifndef OPTILOG_OPTILOG_HPP
#define OPTILOG_OPTILOG_HPP

#include "analysis.hpp"
#include "batch.hpp"
#include "bytes.hpp"
#include "config.hpp"
#include "config_search.hpp"
#include "core.hpp"
#include "experiment.hpp"
#include "graph.hpp"
#include "json_io.hpp"
#include "latency.hpp"
#include "log.hpp"
#include "misbehavior.hpp"
#include "pbft_score.hpp"
#include "simnet.hpp"
#include "suspicion.hpp"
#include "tree_candidates.hpp"
#include "tree_score.hpp"

#endif
