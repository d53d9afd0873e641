#pragma once

// CSV exchange of feature vectors and cluster labels between the `features`
// and `cluster` subcommands.

#include <filesystem>
#include <string>
#include <vector>

#include "elqa/miners.hpp"
#include "elqa/preprocess.hpp"

namespace elqa {

/// Header of the feature table, in column order.
const std::vector<std::string>& feature_columns();

/// One row per vector, shortest round-trip decimals, empty cell for an
/// absent capacitance.
std::string features_csv(const std::vector<FeatureVector>& features);

/// Reads a table written by `features_csv`. Throws MissingFile, MalformedRow.
std::vector<FeatureVector> read_features_csv(const std::filesystem::path& path);

/// Numeric matrix of the features. The capacitance column is kept only when
/// every row carries a value.
PointMatrix feature_matrix(const std::vector<FeatureVector>& features);

/// `measurement_id,label` rows in matrix order.
std::string labels_csv(const PointMatrix& m, const ClusterAssignment& assignment);

}  // namespace elqa
