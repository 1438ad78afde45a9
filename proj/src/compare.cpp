#include "graphfit/eval/compare.hpp"

#include <json.hpp>

#include <iomanip>
#include <sstream>

#include "graphfit/eval/metrics.hpp"
#include "graphfit/geom/jet.hpp"
#include "graphfit/net/pipeline.hpp"
#include "graphfit/training/checkpoint.hpp"

namespace graphfit::eval {

std::string MethodSpec::label() const {
  switch (kind) {
    case MethodKind::Pca: return "pca";
    case MethodKind::Jet: return "jet";
    default: return "graphfit";
  }
}

std::vector<std::string> default_augmentations() {
  return {"noiseless", "noise_0.00125", "noise_0.006", "noise_0.012",
          "gradient", "striped"};
}

data::ShapeRecord apply_augmentation(const data::ShapeRecord& shape,
                                     const std::string& name, std::uint64_t seed) {
  data::ShapeRecord out = shape;
  out.tags.push_back(name);
  if (name == "noiseless") return out;
  if (name.rfind("noise_", 0) == 0) {
    const double sigma = std::stod(name.substr(6));
    out.cloud = data::add_gaussian_noise(shape.cloud, sigma, seed);
    return out;
  }
  if (name == "gradient") {
    out.cloud = data::density_gradient(shape.cloud, seed);
    return out;
  }
  if (name == "striped") {
    out.cloud = data::density_striped(shape.cloud, seed);
    return out;
  }
  throw ConfigError("unknown augmentation: " + name);
}

MetricsReport compare_methods(const std::vector<data::ShapeRecord>& shapes,
                              const std::vector<MethodSpec>& methods,
                              const CompareOptions& options) {
  if (shapes.empty()) throw ConfigError("compare_methods: no shapes");
  if (methods.empty()) throw ConfigError("compare_methods: no methods");
  for (const data::ShapeRecord& s : shapes)
    if (!s.cloud.has_normals())
      throw ConfigError("compare_methods: shape '" + s.name + "' lacks normals");

  // Load checkpoints up front so a bad path fails before any work.
  std::vector<std::optional<net::Model>> models(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    if (methods[m].kind != MethodKind::Model) continue;
    if (methods[m].checkpoint_path.empty())
      throw ConfigError("compare_methods: model method needs a checkpoint");
    models[m] = training::restore_model(
        training::load_checkpoint(methods[m].checkpoint_path));
  }

  MetricsReport report;
  report.shape_count = static_cast<int>(shapes.size());
  for (const MethodSpec& m : methods) report.methods.push_back(m.label());

  const std::vector<std::string> rows =
      options.augmentations.empty() ? default_augmentations() : options.augmentations;

  for (std::size_t r = 0; r < rows.size(); ++r) {
    ReportRow row;
    row.augmentation = rows[r];
    std::vector<MethodScore> sums(methods.size());

    for (std::size_t s = 0; s < shapes.size(); ++s) {
      const data::ShapeRecord aug = apply_augmentation(
          shapes[s], rows[r], derive_seed(options.seed, r, s));
      const int n_points = static_cast<int>(aug.cloud.size());
      const geom::KdTree tree(aug.cloud.points);

      // Seeded query subset.
      Rng rng(derive_seed(options.seed, 0x71756572ULL + r, s));
      std::vector<int> queries;
      const int q_count = std::min(options.queries_per_shape, n_points);
      for (int q = 0; q < q_count; ++q)
        queries.push_back(static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_points))));

      std::vector<geom::Vec3> gt;
      for (int q : queries) gt.push_back(aug.cloud.normals[static_cast<std::size_t>(q)]);

      for (std::size_t m = 0; m < methods.size(); ++m) {
        std::vector<geom::Vec3> pred;
        pred.reserve(queries.size());
        for (int q : queries) {
          switch (methods[m].kind) {
            case MethodKind::Pca: {
              const geom::Patch patch =
                  geom::extract_patch(aug.cloud, tree, q, std::min(options.k, n_points));
              pred.push_back(geom::pca_normal(patch).direction);
              break;
            }
            case MethodKind::Jet: {
              const geom::Patch patch =
                  geom::extract_patch(aug.cloud, tree, q, std::min(options.k, n_points));
              pred.push_back(
                  geom::classical_jet_normal(patch, geom::JetOrder(options.jet_order)).direction);
              break;
            }
            case MethodKind::Model: {
              const geom::Patch patch = geom::extract_patch(
                  aug.cloud, tree, q, models[m]->config().patch_size);
              pred.push_back(net::estimate_normal(*models[m], patch).direction);
              break;
            }
          }
        }
        sums[m].rmse_deg += rmse_angles(pred, gt);
        sums[m].pgp5 += pgp(pred, gt, 5.0);
        sums[m].pgp10 += pgp(pred, gt, 10.0);
      }
    }

    for (MethodScore& score : sums) {
      score.rmse_deg /= static_cast<double>(shapes.size());
      score.pgp5 /= static_cast<double>(shapes.size());
      score.pgp10 /= static_cast<double>(shapes.size());
    }
    row.scores = std::move(sums);
    report.rows.push_back(std::move(row));
  }

  // Cross-category average row.
  ReportRow average;
  average.augmentation = "average";
  average.scores.assign(methods.size(), MethodScore{});
  for (const ReportRow& row : report.rows)
    for (std::size_t m = 0; m < methods.size(); ++m) {
      average.scores[m].rmse_deg += row.scores[m].rmse_deg;
      average.scores[m].pgp5 += row.scores[m].pgp5;
      average.scores[m].pgp10 += row.scores[m].pgp10;
    }
  for (MethodScore& score : average.scores) {
    score.rmse_deg /= static_cast<double>(report.rows.size());
    score.pgp5 /= static_cast<double>(report.rows.size());
    score.pgp10 /= static_cast<double>(report.rows.size());
  }
  report.rows.push_back(std::move(average));
  return report;
}

std::string MetricsReport::to_table() const {
  std::ostringstream os;
  os << std::left << std::setw(16) << "Aug.";
  for (const std::string& m : methods)
    os << std::right << std::setw(26) << (m + "  rmse (pgp5/pgp10)");
  os << "\n";
  for (const ReportRow& row : rows) {
    os << std::left << std::setw(16) << row.augmentation;
    for (const MethodScore& s : row.scores) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(2) << s.rmse_deg << " ("
           << std::setprecision(2) << s.pgp5 << "/" << s.pgp10 << ")";
      os << std::right << std::setw(26) << cell.str();
    }
    os << "\n";
  }
  return os.str();
}

std::string MetricsReport::to_records() const {
  std::ostringstream os;
  for (const ReportRow& row : rows)
    for (std::size_t m = 0; m < methods.size(); ++m) {
      nlohmann::json record{{"method", methods[m]},
                            {"augmentation", row.augmentation},
                            {"rmse_deg", row.scores[m].rmse_deg},
                            {"pgp5", row.scores[m].pgp5},
                            {"pgp10", row.scores[m].pgp10}};
      os << record.dump() << "\n";
    }
  return os.str();
}

}  // namespace graphfit::eval
