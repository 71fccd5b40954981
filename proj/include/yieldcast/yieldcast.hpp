#pragma once

#include "yieldcast/core/csv.hpp"
#include "yieldcast/core/error.hpp"
#include "yieldcast/core/feature_matrix.hpp"
#include "yieldcast/core/log.hpp"
#include "yieldcast/core/parallel.hpp"
#include "yieldcast/core/rng.hpp"
#include "yieldcast/core/text.hpp"
#include "yieldcast/dashboard/bundle.hpp"
#include "yieldcast/dataset/feature_table.hpp"
#include "yieldcast/dataset/synth.hpp"
#include "yieldcast/dataset/yield_records.hpp"
#include "yieldcast/evaluation/metrics.hpp"
#include "yieldcast/explain/exports.hpp"
#include "yieldcast/explain/shapley.hpp"
#include "yieldcast/geodata/districts.hpp"
#include "yieldcast/geodata/raster.hpp"
#include "yieldcast/geodata/zonal.hpp"
#include "yieldcast/matching/fuzzy_join.hpp"
#include "yieldcast/matching/levenshtein.hpp"
#include "yieldcast/models/ensemble.hpp"
#include "yieldcast/models/knn.hpp"
#include "yieldcast/models/leaderboard.hpp"
#include "yieldcast/models/linear.hpp"
#include "yieldcast/models/model.hpp"
#include "yieldcast/models/regressor.hpp"
#include "yieldcast/models/spec.hpp"
#include "yieldcast/models/tree.hpp"
#include "yieldcast/pipeline/config.hpp"
#include "yieldcast/pipeline/manifest.hpp"
#include "yieldcast/pipeline/plot.hpp"
#include "yieldcast/pipeline/run.hpp"
