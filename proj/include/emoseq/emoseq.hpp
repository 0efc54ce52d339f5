#pragma once

#include "emoseq/adam.hpp"
#include "emoseq/align.hpp"
#include "emoseq/audio.hpp"
#include "emoseq/binary_io.hpp"
#include "emoseq/checkpoint.hpp"
#include "emoseq/core.hpp"
#include "emoseq/csv.hpp"
#include "emoseq/error.hpp"
#include "emoseq/feature_cache.hpp"
#include "emoseq/fusion.hpp"
#include "emoseq/manifest.hpp"
#include "emoseq/metrics.hpp"
#include "emoseq/mfcc.hpp"
#include "emoseq/model.hpp"
#include "emoseq/pipeline.hpp"
#include "emoseq/plot.hpp"
#include "emoseq/segment_stats.hpp"
#include "emoseq/synth.hpp"
#include "emoseq/trainer.hpp"
