#include "graphfit/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "graphfit/eval/compare.hpp"
#include "graphfit/eval/denoise.hpp"
#include "graphfit/eval/heatmap.hpp"
#include "graphfit/geom/jet.hpp"
#include "graphfit/net/pipeline.hpp"
#include "graphfit/training/trainer.hpp"

namespace graphfit::cli {

namespace {

using nlohmann::json;

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

net::ModelConfig model_config_from_json(const json& j) {
  net::ModelConfig c;
  maybe(j, "jet_order", c.jet_order);
  maybe(j, "patch_size", c.patch_size);
  maybe(j, "point_conv_widths", c.point_conv_widths);
  maybe(j, "graph_block_count", c.graph_block_count);
  maybe(j, "graph_block_widths", c.graph_block_widths);
  maybe(j, "k1", c.k1);
  maybe(j, "k2", c.k2);
  maybe(j, "use_multi_scale", c.use_multi_scale);
  maybe(j, "use_adaptive_module", c.use_adaptive_module);
  maybe(j, "head_widths", c.head_widths);
  maybe(j, "stn_point_widths", c.stn_point_widths);
  maybe(j, "stn_fc_widths", c.stn_fc_widths);
  maybe(j, "fstn_point_widths", c.fstn_point_widths);
  maybe(j, "fstn_fc_widths", c.fstn_fc_widths);
  return c;
}

training::TrainConfig train_config_from_json(const json& j) {
  training::TrainConfig c;
  maybe(j, "batch_size", c.batch_size);
  maybe(j, "learning_rate", c.learning_rate);
  maybe(j, "epochs", c.epochs);
  maybe(j, "decay_epochs", c.decay_epochs);
  maybe(j, "decay_factor", c.decay_factor);
  maybe(j, "seed", c.seed);
  return c;
}

training::LossWeights loss_weights_from_json(const json& j) {
  training::LossWeights w;
  maybe(j, "lambda1", w.lambda1);
  maybe(j, "lambda2", w.lambda2);
  maybe(j, "lambda3", w.lambda3);
  maybe(j, "lambda4", w.lambda4);
  return w;
}

std::string shapes_dir(const std::string& list_path, const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  return std::filesystem::path(list_path).parent_path().string();
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(csv);
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
  std::string input, output, method = "jet", checkpoint, queries;
  int k = 256;
  int jet_order = 3;
};

int cmd_estimate(const EstimateArgs& a) {
  std::cout << "estimate: method=" << a.method << " k=" << a.k
            << " jet_order=" << a.jet_order << " input=" << a.input
            << " output=" << a.output;
  if (!a.checkpoint.empty()) std::cout << " checkpoint=" << a.checkpoint;
  std::cout << "\n";

  geom::PointCloud cloud(data::read_xyz(a.input));
  std::vector<int> queries;
  if (!a.queries.empty()) {
    queries = data::read_pidx(a.queries, cloud.size());
  } else {
    queries.resize(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) queries[i] = static_cast<int>(i);
  }

  std::optional<net::Model> model;
  int k = a.k;
  if (a.method == "model") {
    if (a.checkpoint.empty())
      throw ConfigError("estimate: --method model requires --checkpoint");
    model = training::restore_model(training::load_checkpoint(a.checkpoint));
    k = model->config().patch_size;
  } else if (a.method != "pca" && a.method != "jet") {
    throw ConfigError("estimate: unknown method '" + a.method + "'");
  }

  const geom::KdTree tree(cloud.points);
  std::vector<geom::Vec3> normals;
  normals.reserve(queries.size());
  for (int q : queries) {
    const geom::Patch patch = geom::extract_patch(cloud, tree, q, k);
    if (a.method == "pca")
      normals.push_back(geom::pca_normal(patch).direction);
    else if (a.method == "jet")
      normals.push_back(
          geom::classical_jet_normal(patch, geom::JetOrder(a.jet_order)).direction);
    else
      normals.push_back(net::estimate_normal(*model, patch).direction);
  }
  data::write_normals(a.output, normals);
  std::cout << "wrote " << normals.size() << " normals to " << a.output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string shapes, data_dir, config, output, resume;
};

int cmd_train(const TrainArgs& a) {
  json j;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw IoError("cannot open config: " + a.config);
    in >> j;
  }
  const net::ModelConfig model_cfg =
      model_config_from_json(j.value("model", json::object()));
  const training::TrainConfig train_cfg =
      train_config_from_json(j.value("train", json::object()));
  const training::LossWeights weights =
      loss_weights_from_json(j.value("loss", json::object()));
  int per_shape = 1024;
  std::vector<std::string> augmentations = {"noiseless", "noise_0.00125",
                                            "noise_0.006", "noise_0.012"};
  if (j.contains("data")) {
    maybe(j["data"], "per_shape", per_shape);
    maybe(j["data"], "augmentations", augmentations);
  }

  std::cout << "train: shapes=" << a.shapes << " epochs=" << train_cfg.epochs
            << " batch_size=" << train_cfg.batch_size
            << " lr=" << train_cfg.learning_rate << " seed=" << train_cfg.seed
            << " per_shape=" << per_shape
            << " patch_size=" << model_cfg.patch_size
            << " jet_order=" << model_cfg.jet_order
            << " blocks=" << model_cfg.graph_block_count << "\n";

  const std::string dir = shapes_dir(a.shapes, a.data_dir);
  training::TrainingSet set;
  set.per_shape = per_shape;
  std::size_t shape_idx = 0;
  for (const std::string& name : data::read_shape_list(a.shapes)) {
    const data::ShapeRecord base = data::load_shape(dir, name);
    if (!base.cloud.has_normals())
      throw ConfigError("train: shape '" + name + "' has no .normals file");
    for (const std::string& aug : augmentations) {
      data::ShapeRecord rec =
          eval::apply_augmentation(base, aug, derive_seed(train_cfg.seed, shape_idx));
      rec.name = name + ":" + aug;
      set.shapes.push_back(std::move(rec));
      ++shape_idx;
    }
  }

  net::Model model = net::Model::init(model_cfg, train_cfg.seed);
  training::Trainer trainer(model, train_cfg, weights);
  if (!a.resume.empty()) {
    trainer.resume(a.resume);
    std::cout << "resumed from " << a.resume << " at epoch " << trainer.epoch() << "\n";
  }
  const std::vector<double> losses = trainer.run(set);
  for (std::size_t e = 0; e < losses.size(); ++e)
    std::cout << "epoch " << trainer.epoch() - losses.size() + e << " loss "
              << losses[e] << "\n";
  trainer.save(a.output);
  std::cout << "saved checkpoint to " << a.output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string shapes, data_dir, methods = "pca,jet", checkpoint, report, records,
              augmentations;
  int k = 256;
  int jet_order = 3;
  int queries_per_shape = 64;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a) {
  std::cout << "eval: shapes=" << a.shapes << " methods=" << a.methods
            << " k=" << a.k << " jet_order=" << a.jet_order
            << " queries_per_shape=" << a.queries_per_shape << " seed=" << a.seed
            << "\n";

  std::vector<eval::MethodSpec> methods;
  for (const std::string& m : split_csv(a.methods)) {
    eval::MethodSpec spec;
    if (m == "pca") spec.kind = eval::MethodKind::Pca;
    else if (m == "jet") spec.kind = eval::MethodKind::Jet;
    else if (m == "model") {
      spec.kind = eval::MethodKind::Model;
      spec.checkpoint_path = a.checkpoint;
    } else throw ConfigError("eval: unknown method '" + m + "'");
    methods.push_back(spec);
  }

  const std::string dir = shapes_dir(a.shapes, a.data_dir);
  std::vector<data::ShapeRecord> shapes;
  for (const std::string& name : data::read_shape_list(a.shapes))
    shapes.push_back(data::load_shape(dir, name));

  eval::CompareOptions options;
  options.k = a.k;
  options.jet_order = a.jet_order;
  options.queries_per_shape = a.queries_per_shape;
  options.seed = a.seed;
  if (!a.augmentations.empty()) options.augmentations = split_csv(a.augmentations);

  const eval::MetricsReport report = eval::compare_methods(shapes, methods, options);
  std::cout << report.to_table();
  if (!a.report.empty()) {
    std::ofstream out(a.report);
    if (!out) throw IoError("cannot open report for write: " + a.report);
    out << report.to_table();
  }
  if (!a.records.empty()) {
    std::ofstream out(a.records);
    if (!out) throw IoError("cannot open records for write: " + a.records);
    out << report.to_records();
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct DenoiseArgs {
  std::string input, normals, output;
  double gamma = 0.05;
  int iters = 10;
  int k = 8;
};

int cmd_denoise(const DenoiseArgs& a) {
  std::cout << "denoise: input=" << a.input << " normals=" << a.normals
            << " output=" << a.output << " gamma=" << a.gamma
            << " iters=" << a.iters << " k=" << a.k << "\n";
  geom::PointCloud cloud(data::read_xyz(a.input), data::read_normals(a.normals));
  if (cloud.normals.size() != cloud.points.size())
    throw SizeError("denoise: normals count does not match points");
  eval::DenoiseConfig config;
  config.gamma = a.gamma;
  config.iterations = a.iters;
  config.k = a.k;
  const geom::PointCloud result = eval::denoise(cloud, config);
  data::write_xyz(a.output, result.points);
  std::cout << "wrote " << result.points.size() << " points to " << a.output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string kind;
  int count = 1000;
  std::uint64_t seed = 0;
  std::string output = "shape";
  data::SynthParams params;
};

int cmd_synth(const SynthArgs& a) {
  std::cout << "synth: kind=" << a.kind << " count=" << a.count
            << " seed=" << a.seed << " output=" << a.output << "\n";
  const data::ShapeRecord shape =
      data::synth_shape(data::parse_synth_kind(a.kind), a.count, a.params, a.seed);
  data::write_xyz(a.output + ".xyz", shape.cloud.points);
  data::write_normals(a.output + ".normals", shape.cloud.normals);
  std::cout << "wrote " << a.output << ".xyz and " << a.output << ".normals\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"GraphFit point-cloud normal estimation"};
  app.require_subcommand(1);

  EstimateArgs est;
  CLI::App* estimate = app.add_subcommand("estimate", "Estimate normals for a cloud");
  estimate->add_option("--input", est.input, ".xyz input")->required();
  estimate->add_option("--output", est.output, ".normals output")->required();
  estimate->add_option("--method", est.method, "pca | jet | model");
  estimate->add_option("--k", est.k, "neighborhood size");
  estimate->add_option("--jet-order", est.jet_order, "polynomial order");
  estimate->add_option("--checkpoint", est.checkpoint, "model checkpoint");
  estimate->add_option("--queries", est.queries, ".pidx query subset");

  TrainArgs tra;
  CLI::App* train = app.add_subcommand("train", "Train a model");
  train->add_option("--shapes", tra.shapes, "shape list file")->required();
  train->add_option("--data-dir", tra.data_dir, "shape file directory");
  train->add_option("--config", tra.config, "JSON train/model/loss config");
  train->add_option("--output", tra.output, "checkpoint output")->required();
  train->add_option("--resume", tra.resume, "checkpoint to resume from");

  EvalArgs eva;
  CLI::App* evalc = app.add_subcommand("eval", "Compare methods");
  evalc->add_option("--shapes", eva.shapes, "shape list file")->required();
  evalc->add_option("--data-dir", eva.data_dir, "shape file directory");
  evalc->add_option("--methods", eva.methods, "comma list: pca,jet,model");
  evalc->add_option("--checkpoint", eva.checkpoint, "model checkpoint");
  evalc->add_option("--report", eva.report, "text table output");
  evalc->add_option("--records", eva.records, "JSONL records output");
  evalc->add_option("--augmentations", eva.augmentations, "comma list of rows");
  evalc->add_option("--k", eva.k, "neighborhood size");
  evalc->add_option("--jet-order", eva.jet_order, "polynomial order");
  evalc->add_option("--queries-per-shape", eva.queries_per_shape, "queries per shape");
  evalc->add_option("--seed", eva.seed, "rng seed");

  DenoiseArgs den;
  CLI::App* denoise = app.add_subcommand("denoise", "Normal-guided denoising");
  denoise->add_option("--input", den.input, ".xyz input")->required();
  denoise->add_option("--normals", den.normals, ".normals input")->required();
  denoise->add_option("--output", den.output, ".xyz output")->required();
  denoise->add_option("--gamma", den.gamma, "step size");
  denoise->add_option("--iters", den.iters, "iterations");
  denoise->add_option("--k", den.k, "neighborhood size");

  SynthArgs syn;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic shape");
  synth->add_option("kind", syn.kind, "plane | sphere | quadric | cube")->required();
  synth->add_option("count", syn.count, "point count")->required();
  synth->add_option("--seed", syn.seed, "rng seed");
  synth->add_option("--output", syn.output, "output basename");
  synth->add_option("--extent", syn.params.extent, "plane/quadric half-extent");
  synth->add_option("--radius", syn.params.radius, "sphere radius");
  synth->add_option("--side", syn.params.side, "cube edge length");
  synth->add_option("--a", syn.params.a, "quadric x^2 coefficient");
  synth->add_option("--b", syn.params.b, "quadric y^2 coefficient");

  std::vector<const char*> argv{"graphfit"};
  for (const std::string& s : args) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (estimate->parsed()) return cmd_estimate(est);
    if (train->parsed()) return cmd_train(tra);
    if (evalc->parsed()) return cmd_eval(eva);
    if (denoise->parsed()) return cmd_denoise(den);
    if (synth->parsed()) return cmd_synth(syn);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace graphfit::cli
