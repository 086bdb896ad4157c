#include "distclass/classify.hpp"
#include "distclass/csv.hpp"
#include "distclass/dataset_io.hpp"
#include "distclass/embed.hpp"
#include "distclass/error.hpp"
#include "distclass/experiment.hpp"
#include "distclass/parallel.hpp"
#include "distclass/toygen.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace distclass;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct DissOptions {
  std::string diss = "wd";
  double reg = 0.01;
  double p = 2.0;
  double tol = 1e-9;
  int max_iter = 10000;
  bool normalize = false;
  std::string bandwidth = "median";
  std::string bound = "auto";
};

void add_diss_options(CLI::App* cmd, DissOptions& o) {
  cmd->add_option("--diss", o.diss, "Dissimilarity: wd | bures | mmd")->capture_default_str();
  cmd->add_option("--reg", o.reg, "Sinkhorn entropy weight")->capture_default_str();
  cmd->add_option("--p", o.p, "Wasserstein order")->capture_default_str();
  cmd->add_option("--tol", o.tol, "Sinkhorn marginal tolerance")->capture_default_str();
  cmd->add_option("--max-iter", o.max_iter, "Sinkhorn iteration cap")->capture_default_str();
  cmd->add_flag("--normalize", o.normalize, "Divide the cost by its median before Sinkhorn");
  cmd->add_option("--bandwidth", o.bandwidth, "MMD kernel bandwidth, or 'median'")
      ->capture_default_str();
  cmd->add_option("--M", o.bound, "Clipping ceiling, or 'auto' (99th percentile of sampled pairs)")
      ->capture_default_str();
}

double parse_number(const std::string& text, const std::string& what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != text.size() || text.empty()) {
    throw InvalidArgument(what + ": not a number: '" + text + "'");
  }
  return v;
}

// Builds the spec with the kernel bandwidth resolved on `reference` and M
// either fixed or estimated on `reference`.
DissimilaritySpec build_spec(const DissOptions& o, const DistributionDataset& ds,
                             const std::vector<std::size_t>& reference, std::uint64_t seed,
                             std::size_t workers) {
  DissimilaritySpec spec;
  spec.kind = parse_dissimilarity_kind(o.diss);
  spec.sinkhorn.reg = o.reg;
  spec.sinkhorn.p = o.p;
  spec.sinkhorn.tol = o.tol;
  spec.sinkhorn.max_iter = o.max_iter;
  spec.sinkhorn.normalize_median = o.normalize;
  if (o.bandwidth == "median") {
    spec.kernel.rule = KernelConfig::BandwidthRule::median;
  } else {
    spec.kernel.bandwidth = parse_number(o.bandwidth, "--bandwidth");
  }
  spec.bound_m = 1.0;
  spec.validate();
  spec = resolve_bandwidth(ds, spec, reference);
  spec.bound_m = o.bound == "auto" ? estimate_bound(ds, reference, spec, seed, 1000, workers)
                                   : parse_number(o.bound, "--M");
  spec.validate();
  return spec;
}

std::vector<std::size_t> all_items(const DistributionDataset& ds) {
  std::vector<std::size_t> v(ds.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

DistributionDataset load_checked(const fs::path& dir) {
  auto ds = load_dataset(dir);
  ds.validate();
  if (ds.size() == 0) throw InvalidArgument(dir.string() + ": dataset has no items");
  return ds;
}

void emit(const std::string& out, const std::string& content) {
  if (out.empty() || out == "-") {
    std::cout << content;
  } else {
    csv::write_file(out, content);
  }
}

std::string read_text(const std::string& path) {
  if (!fs::is_regular_file(path)) throw InvalidArgument("file not found: " + path);
  return csv::read_file(path);
}

std::string distance_csv(const DistanceMatrix& d) {
  std::string out = "id";
  for (auto c : d.col_ids) out += "," + std::to_string(c);
  out += "\n";
  for (Eigen::Index r = 0; r < d.values.rows(); ++r) {
    out += std::to_string(d.row_ids[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < d.values.cols(); ++c) {
      out += "," + csv::format_double(d.values(r, c));
    }
    out += "\n";
  }
  return out;
}

Matrix select_columns(const Matrix& m, const std::vector<std::size_t>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    out.col(static_cast<Eigen::Index>(c)) = m.col(static_cast<Eigen::Index>(cols[c]));
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Distribution classification with dissimilarity embeddings"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t workers = default_workers();
  std::uint64_t seed = 1;
  std::string out;
  app.add_option("--workers", workers, "Worker threads")->capture_default_str();

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a toy dataset directory from a spec file");
  std::string gen_spec;
  bool oracle = false;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--spec", gen_spec,
                  "JSON spec; \"generator\": \"three_class\" (default) or \"mean_separated\"")
      ->required();
  gen->add_option("--out", out, "Output dataset directory")->required();
  gen->add_option("--seed", gen_seed, "Override the spec seed");
  gen->add_flag("--oracle", oracle, "mean_separated: write the true Gaussians instead of samples");

  // gen-shapes
  auto* shapes = app.add_subcommand("gen-shapes", "Write the synthetic sphere/box/torus corpus");
  ShapeCorpusSpec shape_spec;
  shapes->add_option("--out", out, "Output directory")->required();
  shapes->add_option("--seed", shape_spec.seed)->capture_default_str();
  shapes->add_option("--per-class", shape_spec.per_class)->capture_default_str();
  shapes->add_option("--points", shape_spec.points)->capture_default_str();

  // dist / embed / goodness share dataset + dissimilarity flags.
  std::string dataset;
  std::string templates = "all";
  DissOptions diss;

  auto* dist = app.add_subcommand(
      "dist", "Pairwise dissimilarities. CSV: id,<template ids...>; one row per item");
  dist->add_option("--dataset", dataset)->required();
  dist->add_option("--templates", templates, "all | per-class:k")->capture_default_str();
  dist->add_option("--seed", seed)->capture_default_str();
  dist->add_option("--out", out, "Output CSV (stdout if omitted)");
  add_diss_options(dist, diss);

  auto* emb = app.add_subcommand(
      "embed", "Embedding features. CSV: t<template id>...,label; values in [0,1]");
  emb->add_option("--dataset", dataset)->required();
  emb->add_option("--templates", templates, "all | per-class:k")->capture_default_str();
  emb->add_option("--seed", seed)->capture_default_str();
  emb->add_option("--out", out, "Output CSV (stdout if omitted)");
  add_diss_options(emb, diss);

  auto* train = app.add_subcommand(
      "train", "Cross-validate and fit a model. Prints CSV: c,scale,cv_accuracy");
  std::string model_kind = "linear";
  std::size_t folds = 5;
  train->add_option("--dataset", dataset)->required();
  train->add_option("--templates", templates, "all | per-class:k")->capture_default_str();
  train->add_option("--model", model_kind, "linear | kernel | grbf")->capture_default_str();
  train->add_option("--folds", folds)->capture_default_str();
  train->add_option("--seed", seed)->capture_default_str();
  train->add_option("--out", out, "Model file (JSON)")->required();
  add_diss_options(train, diss);

  auto* eval = app.add_subcommand(
      "eval", "Score a model on a dataset. Prints CSV: items,accuracy");
  std::string model_file;
  std::string predictions;
  eval->add_option("--model", model_file)->required();
  eval->add_option("--dataset", dataset)->required();
  eval->add_option("--out", predictions, "Per-item CSV: item,truth,predicted");

  auto* bench = app.add_subcommand(
      "bench",
      "Run an experiment config. CSV: row,n,d,trial,method,c,scale,M,accuracy,accuracy_std,"
      "trials_ok,status,message. Timing CSV: n,d,trial,diss,pairs,seconds,seconds_per_pair");
  std::string config_file;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> bench_seed;
  std::string timing_out;
  bench->add_option("--spec", config_file, "Experiment config (JSON)")->required();
  bench->add_option("--trials", trials, "Override the config trial count");
  bench->add_option("--seed", bench_seed, "Override the config seed");
  bench->add_option("--folds", folds, "Override the CV fold count");
  bench->add_option("--out", out, "Results CSV (stdout if omitted)");
  bench->add_option("--timing", timing_out, "Timing CSV (default: <out stem>_timing.csv)");

  auto* conc = app.add_subcommand(
      "concentration",
      "Deviation frequencies vs bounds. CSV: n,eps,freq_bures,bound_bures,exceeds_bures,"
      "freq_mmd,bound_mmd,exceeds_mmd");
  conc->add_option("--spec", config_file, "Concentration spec (JSON)")->required();
  conc->add_option("--trials", trials, "Override the trial count");
  conc->add_option("--seed", bench_seed, "Override the seed");
  conc->add_option("--out", out, "Output CSV (stdout if omitted)");

  auto* good = app.add_subcommand("goodness", "Empirical goodness. CSV: gamma,epsilon_hat");
  std::vector<double> gammas{0.0};
  good->add_option("--dataset", dataset)->required();
  good->add_option("--gamma", gammas, "Margins, comma separated")->delimiter(',');
  good->add_option("--seed", seed)->capture_default_str();
  good->add_option("--out", out, "Output CSV (stdout if omitted)");
  add_diss_options(good, diss);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (workers == 0) throw InvalidArgument("--workers must be >= 1");

  if (gen->parsed()) {
    json j;
    const std::string text = read_text(gen_spec);
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(gen_spec, e.byte, e.what());
    }
    if (!j.is_object()) throw InvalidArgument(gen_spec + ": expected a JSON object");
    const std::string generator = j.value("generator", std::string("three_class"));
    j.erase("generator");
    DistributionDataset ds;
    if (generator == "three_class") {
      auto spec = toy_spec_from_json(j.dump(), gen_spec);
      if (gen_seed) spec.seed = *gen_seed;
      ds = gen_three_class(spec);
    } else if (generator == "mean_separated") {
      auto spec = mean_sep_spec_from_json(j.dump(), gen_spec);
      if (gen_seed) spec.seed = *gen_seed;
      ds = oracle ? gen_mean_separated_oracle(spec) : gen_mean_separated(spec);
    } else {
      throw InvalidArgument(gen_spec + ": unknown generator '" + generator + "'");
    }
    save_dataset(ds, out);
    return 0;
  }

  if (shapes->parsed()) {
    write_shape_corpus(out, shape_spec);
    return 0;
  }

  if (dist->parsed() || emb->parsed() || good->parsed()) {
    const auto ds = load_checked(dataset);
    const auto all = all_items(ds);
    const auto strategy = TemplateStrategy::parse(templates);
    const auto tmpl = good->parsed() ? all : select_templates(ds, strategy, seed);
    const auto spec = build_spec(diss, ds, tmpl, seed, workers);
    if (good->parsed()) {
      emit(out, goodness_csv(goodness_curve(ds, spec, gammas, workers)));
      return 0;
    }
    const auto d = pairwise_matrix(ds, all, tmpl, spec, workers);
    if (dist->parsed()) {
      emit(out, distance_csv(d));
      return 0;
    }
    const auto e = embed_distances(d, ds.labels(), ds.codebook, spec);
    std::string text;
    for (auto t : tmpl) text += "t" + std::to_string(t) + ",";
    text += "label\n";
    for (Eigen::Index r = 0; r < e.features.rows(); ++r) {
      for (Eigen::Index c = 0; c < e.features.cols(); ++c) {
        text += csv::format_double(e.features(r, c)) + ",";
      }
      text += ds.codebook[static_cast<std::size_t>(e.labels[static_cast<std::size_t>(r)])] + "\n";
    }
    emit(out, text);
    return 0;
  }

  if (train->parsed()) {
    const auto ds = load_checked(dataset);
    const auto all = all_items(ds);
    const auto kind = parse_model_kind(model_kind);
    const auto tmpl = select_templates(ds, TemplateStrategy::parse(templates), seed);
    const auto spec = build_spec(diss, ds, tmpl, seed, workers);
    const Matrix square = pairwise_matrix(ds, all, all, spec, workers).values;
    CVGrid grid;
    grid.folds = folds;
    grid.seed = seed;
    const auto labels = ds.labels();
    const CvResult cv = cross_validate(square, labels, ds.num_classes(), spec.bound_m, grid, kind);
    TrainedModel model;
    if (kind == ModelKind::grbf) {
      model = train_grbf(square, labels, ds.codebook, cv.best.c,
                         cv.best.scale / median_squared_entry(square));
    } else {
      const Matrix x = select_columns(square, tmpl) / spec.bound_m;
      model = kind == ModelKind::linear
                  ? train_linear(x, labels, ds.codebook, cv.best.c)
                  : train_kernel(x, labels, ds.codebook, cv.best.c,
                                 cv.best.scale * median_row_distance(x));
    }
    json bundle;
    bundle["format"] = "distclass-bundle";
    bundle["version"] = 1;
    bundle["dataset"] = fs::absolute(dataset).lexically_normal().string();
    bundle["templates"] = kind == ModelKind::grbf ? all : tmpl;
    bundle["dissimilarity"] = json::parse(dissimilarity_to_json(spec));
    bundle["model"] = json::parse(model_to_json(model));
    csv::write_file(out, bundle.dump(1) + "\n");
    std::cout << "c,scale,cv_accuracy\n"
              << csv::format_double(cv.best.c) << "," << csv::format_double(cv.best.scale) << ","
              << csv::format_double(cv.best.mean_accuracy) << "\n";
    return 0;
  }

  if (eval->parsed()) {
    const std::string text = read_text(model_file);
    json bundle;
    try {
      bundle = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(model_file, e.byte, e.what());
    }
    DissimilaritySpec spec;
    TrainedModel model;
    std::vector<std::size_t> tmpl;
    std::string train_dir;
    try {
      if (bundle.at("format").get<std::string>() != "distclass-bundle") {
        throw InvalidArgument(model_file + ": not a model file");
      }
      spec = dissimilarity_from_json(bundle.at("dissimilarity").dump(), model_file);
      model = model_from_json(bundle.at("model").dump(), model_file);
      tmpl = bundle.at("templates").get<std::vector<std::size_t>>();
      train_dir = bundle.at("dataset").get<std::string>();
    } catch (const json::exception& e) {
      throw InvalidArgument(model_file + ": malformed model file: " + e.what());
    }
    const auto train_ds = load_checked(train_dir);
    const auto test_ds = load_checked(dataset);
    if (test_ds.dimension != train_ds.dimension) {
      throw InvalidArgument("test dataset dimension differs from the training dataset");
    }
    for (auto t : tmpl) {
      if (t >= train_ds.size()) throw InvalidArgument(model_file + ": template id out of range");
    }
    DistributionDataset joint = train_ds;
    std::vector<std::size_t> rows;
    std::vector<int> truth;
    for (const auto& item : test_ds.items) {
      const auto& name = test_ds.codebook[static_cast<std::size_t>(item.label)];
      const auto it = std::find(model.codebook.begin(), model.codebook.end(), name);
      if (it == model.codebook.end()) {
        throw InvalidArgument("test class '" + name + "' is unknown to the model");
      }
      rows.push_back(joint.items.size());
      truth.push_back(static_cast<int>(it - model.codebook.begin()));
      joint.items.push_back(item);
    }
    const Matrix d = pairwise_matrix(joint, rows, tmpl, spec, workers).values;
    const Matrix features = model.kind == ModelKind::grbf ? d : Matrix(d / spec.bound_m);
    const auto pred = predict(model, features);
    std::cout << "items,accuracy\n"
              << truth.size() << "," << csv::format_double(accuracy(pred, truth)) << "\n";
    if (!predictions.empty()) {
      std::string csv_text = "item,truth,predicted\n";
      for (std::size_t i = 0; i < pred.size(); ++i) {
        csv_text += std::to_string(i) + "," + model.codebook[static_cast<std::size_t>(truth[i])] +
                    "," + model.codebook[static_cast<std::size_t>(pred[i])] + "\n";
      }
      csv::write_file(predictions, csv_text);
    }
    return 0;
  }

  if (bench->parsed()) {
    auto cfg = config_from_json(read_text(config_file), config_file);
    if (trials) cfg.trials = *trials;
    if (bench_seed) cfg.seed = *bench_seed;
    if (bench->count("--folds") > 0) cfg.grid.folds = folds;
    const auto result = run_bench(cfg, workers);
    emit(out, bench_csv(result));
    if (timing_out.empty() && !out.empty() && out != "-") {
      const fs::path p(out);
      timing_out = (p.parent_path() / (p.stem().string() + "_timing.csv")).string();
    }
    if (!timing_out.empty()) csv::write_file(timing_out, timing_csv(result));
    return 0;
  }

  if (conc->parsed()) {
    auto cfg = concentration_from_json(read_text(config_file), config_file);
    if (trials) cfg.trials = *trials;
    if (bench_seed) cfg.seed = *bench_seed;
    emit(out, concentration_csv(run_concentration(cfg, workers)));
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
