// Method-comparison harness over the reference augmentation categories.

#ifndef GRAPHFIT_EVAL_COMPARE_HPP
#define GRAPHFIT_EVAL_COMPARE_HPP

#include <optional>
#include <string>
#include <vector>

#include "graphfit/data/dataset.hpp"
#include "graphfit/net/model.hpp"

namespace graphfit::eval {

enum class MethodKind { Pca, Jet, Model };

struct MethodSpec {
  MethodKind kind = MethodKind::Pca;
  std::string checkpoint_path;  // Model only

  std::string label() const;
};

struct MethodScore {
  double rmse_deg = 0.0;
  double pgp5 = 0.0;
  double pgp10 = 0.0;
};

struct ReportRow {
  std::string augmentation;
  std::vector<MethodScore> scores;  // one per method, in method order
};

struct MetricsReport {
  std::vector<std::string> methods;
  std::vector<ReportRow> rows;  // fixed row order, "average" last
  int shape_count = 0;

  std::string to_table() const;
  /// Line-delimited JSON records, one per method x augmentation.
  std::string to_records() const;
};

struct CompareOptions {
  int k = 256;
  int jet_order = 3;
  int queries_per_shape = 64;
  std::uint64_t seed = 0;
  /// Augmentation row names; defaults to the full reference set:
  /// noiseless, the three noise tiers, gradient, striped.
  std::vector<std::string> augmentations;
};

std::vector<std::string> default_augmentations();

/// Applies one named augmentation to a shape (seeded).
data::ShapeRecord apply_augmentation(const data::ShapeRecord& shape,
                                     const std::string& name, std::uint64_t seed);

/// Runs every method over every augmentation row and aggregates unoriented
/// RMSE / PGP5 / PGP10 per row, plus the cross-row average. Shapes must
/// carry ground-truth normals.
MetricsReport compare_methods(const std::vector<data::ShapeRecord>& shapes,
                              const std::vector<MethodSpec>& methods,
                              const CompareOptions& options);

}  // namespace graphfit::eval

#endif  // GRAPHFIT_EVAL_COMPARE_HPP
