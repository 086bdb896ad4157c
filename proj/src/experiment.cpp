#include "distclass/experiment.hpp"

#include "distclass/csv.hpp"
#include "distclass/dataset_io.hpp"
#include "distclass/error.hpp"
#include "distclass/gaussian.hpp"
#include "distclass/linalg.hpp"
#include "distclass/parallel.hpp"

#include <Eigen/Cholesky>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

namespace distclass {

namespace {

using nlohmann::json;

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, e.byte, e.what());
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) {
    throw InvalidArgument(what + ": expected a JSON object");
  }
  for (const auto& item : j.items()) {
    if (!allowed.contains(item.key())) {
      throw InvalidArgument(what + ": unknown key '" + item.key() + "'");
    }
  }
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json rows_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_json(m.row(i).transpose()));
  return out;
}

Matrix rows_from(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != m.cols()) {
      throw InvalidArgument("matrix rows differ in length");
    }
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return m;
}

template <typename F>
auto guarded(const std::string& source, F&& body) {
  try {
    return body();
  } catch (const json::exception& e) {
    throw InvalidArgument(source + ": " + e.what());
  }
}

ToySpec3Class toy_from(const json& j, const std::string& source) {
  check_keys(j,
             {"d", "n_dists", "n_samples", "mean_center", "mean_spread", "sigma", "u_range",
              "seed"},
             source);
  ToySpec3Class s;
  if (j.contains("d")) s.d = j["d"].get<std::size_t>();
  if (j.contains("n_dists")) s.n_dists = j["n_dists"].get<std::size_t>();
  if (j.contains("n_samples")) s.n_samples = j["n_samples"].get<std::size_t>();
  if (j.contains("mean_center") && !j["mean_center"].is_null()) {
    s.mean_center = vector_from(j["mean_center"]);
  }
  if (j.contains("mean_spread")) s.mean_spread = j["mean_spread"].get<double>();
  if (j.contains("sigma")) s.sigma = j["sigma"].get<std::array<double, 3>>();
  if (j.contains("u_range")) {
    s.u_range = j["u_range"].get<std::array<std::pair<double, double>, 3>>();
  }
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  s.validate();
  return s;
}

json toy_json(const ToySpec3Class& s) {
  json j;
  j["d"] = s.d;
  j["n_dists"] = s.n_dists;
  j["n_samples"] = s.n_samples;
  j["mean_center"] = s.mean_center.size() == 0 ? json(nullptr) : vector_json(s.mean_center);
  j["mean_spread"] = s.mean_spread;
  j["sigma"] = s.sigma;
  j["u_range"] = s.u_range;
  j["seed"] = s.seed;
  return j;
}

json sinkhorn_json(const SinkhornConfig& c) {
  return {{"reg", c.reg},
          {"p", c.p},
          {"tol", c.tol},
          {"max_iter", c.max_iter},
          {"normalize_median", c.normalize_median}};
}

SinkhornConfig sinkhorn_from(const json& j, SinkhornConfig c, const std::string& source) {
  check_keys(j, {"reg", "p", "tol", "max_iter", "normalize_median"}, source);
  if (j.contains("reg")) c.reg = j["reg"].get<double>();
  if (j.contains("p")) c.p = j["p"].get<double>();
  if (j.contains("tol")) c.tol = j["tol"].get<double>();
  if (j.contains("max_iter")) c.max_iter = j["max_iter"].get<int>();
  if (j.contains("normalize_median")) c.normalize_median = j["normalize_median"].get<bool>();
  c.validate();
  return c;
}

json bandwidth_json(const KernelConfig& k) {
  return k.rule == KernelConfig::BandwidthRule::median ? json("median") : json(k.bandwidth);
}

KernelConfig bandwidth_from(const json& j) {
  KernelConfig k;
  if (j.is_string()) {
    if (j.get<std::string>() != "median") {
      throw InvalidArgument("bandwidth must be a number or \"median\"");
    }
    k.rule = KernelConfig::BandwidthRule::median;
  } else {
    k.bandwidth = j.get<double>();
  }
  k.validate();
  return k;
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(base),
                                   static_cast<std::uint32_t>(base >> 32)};
  for (auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::vector<std::size_t> iota(std::size_t from, std::size_t count) {
  std::vector<std::size_t> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = from + i;
  return v;
}

Matrix columns(const Matrix& m, const std::vector<std::size_t>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    out.col(static_cast<Eigen::Index>(c)) = m.col(static_cast<Eigen::Index>(cols[c]));
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' || ch == '\r' ? ' ' : ch;
  }
  return out + "\"";
}

// One trial's data: the training items come first in `train`, test items
// in `test`, both indexing `data`.
struct TrialData {
  DistributionDataset data;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct MethodOutcome {
  double c = 0.0;
  double scale = 0.0;
  double bound_m = 0.0;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  std::string message;
};

std::vector<int> labels_of(const DistributionDataset& ds, const std::vector<std::size_t>& ids) {
  std::vector<int> y;
  y.reserve(ids.size());
  for (auto i : ids) y.push_back(ds.items[i].label);
  return y;
}

MethodOutcome fit_and_score(ModelKind model, const Matrix& d_train, const Matrix& d_test_cols,
                            const std::vector<std::size_t>& template_pos,
                            const std::vector<int>& y_train, const std::vector<int>& y_test,
                            const std::vector<std::string>& codebook, double m,
                            const CVGrid& grid, bool test_has_all_train) {
  MethodOutcome out;
  out.bound_m = m;
  const CvResult cv = cross_validate(d_train, y_train, codebook.size(), m, grid, model);
  out.c = cv.best.c;
  out.scale = cv.best.scale;
  TrainedModel fitted;
  Matrix features;
  if (model == ModelKind::grbf) {
    const double sigma = cv.best.scale / median_squared_entry(d_train);
    fitted = train_grbf(d_train, y_train, codebook, cv.best.c, sigma);
    features = d_test_cols;
  } else {
    const Matrix x_train = columns(d_train, template_pos) / m;
    features = (test_has_all_train ? columns(d_test_cols, template_pos) : d_test_cols) / m;
    if (model == ModelKind::linear) {
      fitted = train_linear(x_train, y_train, codebook, cv.best.c);
    } else {
      const double bw = cv.best.scale * median_row_distance(x_train);
      fitted = train_kernel(x_train, y_train, codebook, cv.best.c, bw);
    }
  }
  out.accuracy = accuracy(predict(fitted, features), y_test);
  out.ok = true;
  return out;
}

}  // namespace

std::string toy_spec_to_json(const ToySpec3Class& spec) { return toy_json(spec).dump(2); }

ToySpec3Class toy_spec_from_json(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  return guarded(source, [&] { return toy_from(j, source); });
}

std::string mean_sep_spec_to_json(const MeanSepSpec& input) {
  const MeanSepSpec s = input.resolved();
  json j;
  j["d"] = s.d;
  j["m_neg"] = vector_json(s.m_neg);
  j["m_pos"] = vector_json(s.m_pos);
  j["sigma0"] = rows_json(s.sigma0);
  j["sigma"] = rows_json(s.sigma);
  j["n_dists"] = s.n_dists;
  j["n_samples"] = s.n_samples;
  j["seed"] = s.seed;
  return j.dump(2);
}

MeanSepSpec mean_sep_spec_from_json(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  return guarded(source, [&] {
    check_keys(j, {"d", "m_neg", "m_pos", "sigma0", "sigma", "n_dists", "n_samples", "seed"},
               source);
    MeanSepSpec s;
    if (j.contains("d")) s.d = j["d"].get<std::size_t>();
    if (j.contains("m_neg")) s.m_neg = vector_from(j["m_neg"]);
    if (j.contains("m_pos")) s.m_pos = vector_from(j["m_pos"]);
    if (j.contains("sigma0")) s.sigma0 = rows_from(j["sigma0"]);
    if (j.contains("sigma")) s.sigma = rows_from(j["sigma"]);
    if (j.contains("n_dists")) s.n_dists = j["n_dists"].get<std::size_t>();
    if (j.contains("n_samples")) s.n_samples = j["n_samples"].get<std::size_t>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    s.resolved().validate();
    return s;
  });
}

std::string dissimilarity_to_json(const DissimilaritySpec& spec) {
  json j = sinkhorn_json(spec.sinkhorn);
  j["kind"] = to_string(spec.kind);
  j["bandwidth"] = bandwidth_json(spec.kernel);
  j["M"] = spec.bound_m;
  return j.dump(2);
}

DissimilaritySpec dissimilarity_from_json(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  return guarded(source, [&] {
    check_keys(j, {"kind", "reg", "p", "tol", "max_iter", "normalize_median", "bandwidth", "M"},
               source);
    DissimilaritySpec spec;
    spec.kind = parse_dissimilarity_kind(j.at("kind").get<std::string>());
    json ot = json::object();
    for (const char* key : {"reg", "p", "tol", "max_iter", "normalize_median"}) {
      if (j.contains(key)) ot[key] = j[key];
    }
    spec.sinkhorn = sinkhorn_from(ot, SinkhornConfig{}, source);
    if (j.contains("bandwidth")) spec.kernel = bandwidth_from(j["bandwidth"]);
    spec.bound_m = j.at("M").get<double>();
    spec.validate();
    return spec;
  });
}

std::string MethodSpec::name() const {
  return to_string(diss) + "+" + to_string(model);
}

MethodSpec MethodSpec::parse(const std::string& text) {
  const auto plus = text.find('+');
  if (plus == std::string::npos) {
    throw InvalidArgument("method must look like <diss>+<model>, got '" + text + "'");
  }
  return {parse_dissimilarity_kind(text.substr(0, plus)), parse_model_kind(text.substr(plus + 1))};
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw InvalidArgument("config: trials must be >= 1");
  if (methods.empty()) throw InvalidArgument("config: no methods");
  grid.validate();
  sinkhorn.validate();
  kernel.validate();
  if (bound_m && !(*bound_m > 0.0 && std::isfinite(*bound_m))) {
    throw InvalidArgument("config: M must be positive");
  }
  if (source == Source::toy) {
    toy.validate();
    if (n_test < 1) throw InvalidArgument("config: n_test must be >= 1");
  } else {
    if (path.empty()) throw InvalidArgument("config: a data path is required");
    if (sweep != Sweep::none) {
      throw InvalidArgument("config: sweeps need a toy source");
    }
  }
  if (sweep != Sweep::none) {
    if (sweep_values.empty()) throw InvalidArgument("config: sweep without values");
    for (auto v : sweep_values) {
      if (sweep == Sweep::d && v < 2) throw InvalidArgument("config: swept d must be >= 2");
      if (sweep == Sweep::n && v < grid.folds) {
        throw InvalidArgument("config: swept n must be at least the fold count");
      }
    }
    if (sweep == Sweep::d && toy.mean_center.size() != 0) {
      throw InvalidArgument("config: a d sweep needs the default mean centre");
    }
  }
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  const char* sources[] = {"toy", "dataset", "point_cloud"};
  j["source"] = sources[static_cast<int>(cfg.source)];
  if (cfg.source == ExperimentConfig::Source::toy) {
    j["toy"] = toy_json(cfg.toy);
    j["n_test"] = cfg.n_test;
  } else {
    j["path"] = cfg.path.string();
    if (cfg.source == ExperimentConfig::Source::point_cloud) {
      j["subsample"] = cfg.cloud.subsample;
      j["center"] = cfg.cloud.center;
      j["cloud_seed"] = cfg.cloud.seed;
    }
  }
  json methods = json::array();
  for (const auto& m : cfg.methods) methods.push_back(m.name());
  j["methods"] = methods;
  j["sinkhorn"] = sinkhorn_json(cfg.sinkhorn);
  j["bandwidth"] = bandwidth_json(cfg.kernel);
  j["M"] = cfg.bound_m ? json(*cfg.bound_m) : json(nullptr);
  j["templates"] = cfg.templates.to_string();
  j["grid"] = {{"c", cfg.grid.c_values},
               {"kernel_scales", cfg.grid.kernel_scales},
               {"grbf_scales", cfg.grid.grbf_scales},
               {"folds", cfg.grid.folds}};
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  const char* sweeps[] = {"none", "n", "d"};
  j["sweep"] = {{"param", sweeps[static_cast<int>(cfg.sweep)]}, {"values", cfg.sweep_values}};
  return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  return guarded(source, [&] {
    check_keys(j,
               {"source", "toy", "n_test", "path", "subsample", "center", "cloud_seed", "methods",
                "sinkhorn", "bandwidth", "M", "templates", "grid", "trials", "seed", "sweep"},
               source);
    ExperimentConfig cfg;
    const std::string src = j.value("source", std::string("toy"));
    if (src == "toy") {
      cfg.source = ExperimentConfig::Source::toy;
    } else if (src == "dataset") {
      cfg.source = ExperimentConfig::Source::dataset;
    } else if (src == "point_cloud") {
      cfg.source = ExperimentConfig::Source::point_cloud;
    } else {
      throw InvalidArgument(source + ": unknown source '" + src + "'");
    }
    if (j.contains("toy")) cfg.toy = toy_from(j["toy"], source + ": toy");
    if (j.contains("n_test")) cfg.n_test = j["n_test"].get<std::size_t>();
    if (j.contains("path")) {
      cfg.path = j["path"].get<std::string>();
      // Relative data paths are taken relative to the config file.
      if (cfg.path.is_relative() && source.front() != '<') {
        cfg.path = std::filesystem::path(source).parent_path() / cfg.path;
      }
    }
    if (j.contains("subsample")) cfg.cloud.subsample = j["subsample"].get<std::size_t>();
    if (j.contains("center")) cfg.cloud.center = j["center"].get<bool>();
    if (j.contains("cloud_seed")) cfg.cloud.seed = j["cloud_seed"].get<std::uint64_t>();
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto& m : j["methods"]) cfg.methods.push_back(MethodSpec::parse(m.get<std::string>()));
    }
    if (j.contains("sinkhorn")) {
      cfg.sinkhorn = sinkhorn_from(j["sinkhorn"], cfg.sinkhorn, source + ": sinkhorn");
    }
    if (j.contains("bandwidth")) cfg.kernel = bandwidth_from(j["bandwidth"]);
    if (j.contains("M") && !j["M"].is_null()) cfg.bound_m = j["M"].get<double>();
    if (j.contains("templates")) {
      cfg.templates = TemplateStrategy::parse(j["templates"].get<std::string>());
    }
    if (j.contains("grid")) {
      const json& g = j["grid"];
      check_keys(g, {"c", "kernel_scales", "grbf_scales", "folds"}, source + ": grid");
      if (g.contains("c")) cfg.grid.c_values = g["c"].get<std::vector<double>>();
      if (g.contains("kernel_scales")) {
        cfg.grid.kernel_scales = g["kernel_scales"].get<std::vector<double>>();
      }
      if (g.contains("grbf_scales")) {
        cfg.grid.grbf_scales = g["grbf_scales"].get<std::vector<double>>();
      }
      if (g.contains("folds")) cfg.grid.folds = g["folds"].get<std::size_t>();
    }
    if (j.contains("trials")) cfg.trials = j["trials"].get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("sweep")) {
      const json& s = j["sweep"];
      check_keys(s, {"param", "values"}, source + ": sweep");
      const std::string p = s.value("param", std::string("none"));
      if (p == "none") {
        cfg.sweep = ExperimentConfig::Sweep::none;
      } else if (p == "n") {
        cfg.sweep = ExperimentConfig::Sweep::n;
      } else if (p == "d") {
        cfg.sweep = ExperimentConfig::Sweep::d;
      } else {
        throw InvalidArgument(source + ": sweep param must be none, n or d");
      }
      if (s.contains("values")) cfg.sweep_values = s["values"].get<std::vector<std::size_t>>();
    }
    cfg.validate();
    return cfg;
  });
}

BenchResult run_bench(const ExperimentConfig& cfg, std::size_t workers) {
  cfg.validate();
  using Source = ExperimentConfig::Source;
  using Sweep = ExperimentConfig::Sweep;

  DistributionDataset loaded;
  if (cfg.source == Source::dataset) loaded = load_dataset(cfg.path);
  if (cfg.source == Source::point_cloud) loaded = load_point_cloud_dir(cfg.path, cfg.cloud);
  if (cfg.source != Source::toy) loaded.validate();

  const std::vector<std::size_t> sweep_values =
      cfg.sweep == Sweep::none ? std::vector<std::size_t>{0} : cfg.sweep_values;
  const std::size_t num_methods = cfg.methods.size();

  BenchResult result;
  for (std::size_t s = 0; s < sweep_values.size(); ++s) {
    ToySpec3Class toy = cfg.toy;
    if (cfg.sweep == Sweep::n) toy.n_dists = sweep_values[s];
    if (cfg.sweep == Sweep::d) toy.d = sweep_values[s];
    std::vector<std::vector<MethodOutcome>> outcomes(num_methods);
    std::size_t n_train = cfg.source == Source::toy ? toy.n_dists : 0;
    std::size_t dim = cfg.source == Source::toy ? toy.d : 0;

    for (std::size_t t = 0; t < cfg.trials; ++t) {
      TrialData td;
      std::vector<std::size_t> templates;
      try {
        if (cfg.source == Source::toy) {
          ToySpec3Class train_spec = toy;
          train_spec.seed = derive_seed(cfg.seed, {s, t, 0});
          ToySpec3Class test_spec = toy;
          test_spec.n_dists = cfg.n_test;
          test_spec.seed = derive_seed(cfg.seed, {s, t, 1});
          td.data = gen_three_class(train_spec);
          const auto test = gen_three_class(test_spec);
          td.data.items.insert(td.data.items.end(), test.items.begin(), test.items.end());
          td.train = iota(0, train_spec.n_dists);
          td.test = iota(train_spec.n_dists, test_spec.n_dists);
        } else {
          td.data = loaded;
          const std::size_t folds = cfg.grid.folds;
          const auto fold_of =
              stratified_folds(loaded.labels(), folds, derive_seed(cfg.seed, {t / folds, 1}));
          for (std::size_t i = 0; i < loaded.size(); ++i) {
            (fold_of[i] == t % folds ? td.test : td.train).push_back(i);
          }
        }
        n_train = td.train.size();
        dim = td.data.dimension;
        templates = cfg.templates.kind == TemplateStrategy::Kind::all
                        ? td.train
                        : select_templates(td.data, cfg.templates,
                                           derive_seed(cfg.seed, {s, t, 2}), td.train);
      } catch (const Error& e) {
        for (std::size_t k = 0; k < num_methods; ++k) {
          MethodOutcome o;
          o.message = e.what();
          outcomes[k].push_back(o);
        }
        continue;
      }
      const auto y_train = labels_of(td.data, td.train);
      const auto y_test = labels_of(td.data, td.test);
      std::map<std::size_t, std::size_t> pos_in_train;
      for (std::size_t k = 0; k < td.train.size(); ++k) pos_in_train[td.train[k]] = k;
      std::vector<std::size_t> template_pos;
      for (auto id : templates) template_pos.push_back(pos_in_train.at(id));

      CVGrid grid = cfg.grid;
      grid.seed = derive_seed(cfg.seed, {s, t, 3});

      std::vector<bool> done(num_methods, false);
      for (std::size_t first = 0; first < num_methods; ++first) {
        if (done[first]) continue;
        const DissimilarityKind kind = cfg.methods[first].diss;
        std::vector<std::size_t> group;
        bool needs_all_train = false;
        for (std::size_t k = first; k < num_methods; ++k) {
          if (cfg.methods[k].diss != kind) continue;
          group.push_back(k);
          done[k] = true;
          needs_all_train |= cfg.methods[k].model == ModelKind::grbf;
        }
        try {
          DissimilaritySpec spec;
          spec.kind = kind;
          spec.sinkhorn = cfg.sinkhorn;
          spec.kernel = cfg.kernel;
          const auto resolved = resolve_bandwidth(td.data, spec, templates);
          const auto& test_cols = needs_all_train ? td.train : templates;
          const auto start = std::chrono::steady_clock::now();
          const DissimilarityEvaluator eval(td.data, resolved, {}, workers);
          const double inf = std::numeric_limits<double>::infinity();
          Matrix d_train = pairwise_matrix(eval, td.train, td.train, inf, workers).values;
          const double m = cfg.bound_m ? *cfg.bound_m
                                       : estimate_bound(d_train, derive_seed(cfg.seed, {s, t, 4}));
          d_train = d_train.cwiseMin(m);
          const Matrix d_test = pairwise_matrix(eval, td.test, test_cols, m, workers).values;
          const double seconds =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          result.timing.push_back({n_train, dim, t, to_string(kind),
                                   n_train * (n_train + 1) / 2 + td.test.size() * test_cols.size(),
                                   seconds});
          for (auto k : group) {
            try {
              outcomes[k].push_back(fit_and_score(cfg.methods[k].model, d_train, d_test,
                                                  template_pos, y_train, y_test,
                                                  td.data.codebook, m, grid, needs_all_train));
            } catch (const Error& e) {
              MethodOutcome o;
              o.bound_m = m;
              o.message = e.what();
              outcomes[k].push_back(o);
            }
          }
        } catch (const Error& e) {
          for (auto k : group) {
            MethodOutcome o;
            o.message = e.what();
            outcomes[k].push_back(o);
          }
        }
      }
    }

    for (std::size_t t = 0; t < cfg.trials; ++t) {
      for (std::size_t k = 0; k < num_methods; ++k) {
        const auto& o = outcomes[k][t];
        BenchRow row;
        row.row = "trial";
        row.n = n_train;
        row.d = dim;
        row.trial = t;
        row.method = cfg.methods[k].name();
        row.c = o.c;
        row.scale = o.scale;
        row.bound_m = o.bound_m;
        row.accuracy = o.accuracy;
        row.trials_ok = o.ok ? 1 : 0;
        row.status = o.ok ? "ok" : "failed";
        row.message = o.message;
        result.rows.push_back(row);
      }
    }
    if (cfg.trials < 2) continue;
    for (std::size_t k = 0; k < num_methods; ++k) {
      std::vector<double> acc;
      for (const auto& o : outcomes[k]) {
        if (o.ok) acc.push_back(o.accuracy);
      }
      BenchRow row;
      row.row = "aggregate";
      row.n = n_train;
      row.d = dim;
      row.method = cfg.methods[k].name();
      row.trials_ok = acc.size();
      row.accuracy = std::numeric_limits<double>::quiet_NaN();
      row.status = acc.empty() ? "failed" : "ok";
      if (!acc.empty()) {
        double sum = 0.0;
        for (double a : acc) sum += a;
        row.accuracy = sum / static_cast<double>(acc.size());
        double ss = 0.0;
        for (double a : acc) ss += (a - row.accuracy) * (a - row.accuracy);
        row.accuracy_std = acc.size() > 1 ? std::sqrt(ss / static_cast<double>(acc.size() - 1)) : 0.0;
      }
      result.rows.push_back(row);
    }
  }
  return result;
}

std::string bench_csv(const BenchResult& r) {
  std::string out = "row,n,d,trial,method,c,scale,M,accuracy,accuracy_std,trials_ok,status,message\n";
  for (const auto& row : r.rows) {
    const bool trial = row.row == "trial";
    out += row.row + "," + std::to_string(row.n) + "," + std::to_string(row.d) + ",";
    out += trial ? std::to_string(row.trial) : "";
    out += "," + row.method + ",";
    if (trial && row.status == "ok") {
      out += csv::format_double(row.c) + "," + csv::format_double(row.scale) + "," +
             csv::format_double(row.bound_m);
    } else {
      out += ",,";
    }
    out += "," + csv::format_double(row.accuracy) + ",";
    out += trial ? "" : csv::format_double(row.accuracy_std);
    out += "," + std::to_string(row.trials_ok) + "," + row.status + "," + csv_field(row.message);
    out += "\n";
  }
  return out;
}

std::string timing_csv(const BenchResult& r) {
  std::string out = "n,d,trial,diss,pairs,seconds,seconds_per_pair\n";
  for (const auto& t : r.timing) {
    out += std::to_string(t.n) + "," + std::to_string(t.d) + "," + std::to_string(t.trial) + "," +
           t.diss + "," + std::to_string(t.pairs) + "," + csv::format_double(t.seconds) + "," +
           csv::format_double(t.pairs > 0 ? t.seconds / static_cast<double>(t.pairs) : 0.0) +
           "\n";
  }
  return out;
}

void ConcentrationConfig::validate() const {
  if (mean.size() == 0) throw InvalidArgument("concentration: empty mean");
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw InvalidArgument("concentration: covariance must be d x d");
  }
  if (n_grid.empty() || eps_grid.empty()) throw InvalidArgument("concentration: empty grid");
  for (auto n : n_grid) {
    if (n < 2) throw InvalidArgument("concentration: every N must be >= 2");
  }
  for (double e : eps_grid) {
    if (!(e > 0.0)) throw InvalidArgument("concentration: every eps must be positive");
  }
  if (trials < 1) throw InvalidArgument("concentration: trials must be >= 1");
  if (c_v && !(*c_v > 0.0)) throw InvalidArgument("concentration: c_v must be positive");
  if (c_sigma && !(*c_sigma > 0.0)) throw InvalidArgument("concentration: c_sigma must be positive");
  if (!(kernel_bandwidth > 0.0)) throw InvalidArgument("concentration: bandwidth must be positive");
  if (!(kernel_bound > 0.0)) throw InvalidArgument("concentration: kernel bound must be positive");
}

ConcentrationConfig concentration_from_json(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  return guarded(source, [&] {
    check_keys(j,
               {"gaussian", "toy", "class", "n_grid", "eps_grid", "trials", "seed", "c_v",
                "c_sigma", "bandwidth", "kernel_bound"},
               source);
    ConcentrationConfig cfg;
    if (j.contains("gaussian")) {
      const json& g = j["gaussian"];
      check_keys(g, {"mean", "covariance"}, source + ": gaussian");
      cfg.mean = vector_from(g.at("mean"));
      cfg.covariance = rows_from(g.at("covariance"));
    } else if (j.contains("toy")) {
      const ToySpec3Class toy = toy_from(j["toy"], source + ": toy");
      const auto c = j.value("class", std::size_t{0});
      if (c > 2) throw InvalidArgument(source + ": class must be 0, 1 or 2");
      const auto d = static_cast<Eigen::Index>(toy.d);
      cfg.mean = toy.mean_center.size() == 0 ? Vector::Ones(d) : toy.mean_center;
      const double u = 0.5 * (toy.u_range[c].first + toy.u_range[c].second);
      cfg.covariance = toy.sigma[c] * Matrix::Identity(d, d);
      for (Eigen::Index k = 0; k + 1 < d; ++k) {
        cfg.covariance(k, k + 1) = u;
        cfg.covariance(k + 1, k) = u;
      }
    } else {
      throw InvalidArgument(source + ": need a \"gaussian\" or \"toy\" entry");
    }
    if (j.contains("n_grid")) cfg.n_grid = j["n_grid"].get<std::vector<std::size_t>>();
    if (j.contains("eps_grid")) cfg.eps_grid = j["eps_grid"].get<std::vector<double>>();
    if (j.contains("trials")) cfg.trials = j["trials"].get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("c_v") && !j["c_v"].is_null()) cfg.c_v = j["c_v"].get<double>();
    if (j.contains("c_sigma") && !j["c_sigma"].is_null()) cfg.c_sigma = j["c_sigma"].get<double>();
    if (j.contains("bandwidth")) cfg.kernel_bandwidth = j["bandwidth"].get<double>();
    if (j.contains("kernel_bound")) cfg.kernel_bound = j["kernel_bound"].get<double>();
    cfg.validate();
    return cfg;
  });
}

double mmd2_gaussian_vs_samples(const Vector& mean, const Matrix& cov, const Matrix& samples,
                                double bandwidth) {
  if (samples.cols() != mean.size() || cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw InvalidArgument("mmd2_gaussian_vs_samples: dimension mismatch");
  }
  if (samples.rows() == 0) throw InvalidArgument("mmd2_gaussian_vs_samples: no samples");
  if (!(bandwidth > 0.0)) throw InvalidArgument("mmd2_gaussian_vs_samples: bad bandwidth");
  const auto d = mean.size();
  const double s2 = bandwidth * bandwidth;
  const Matrix eye = Matrix::Identity(d, d);
  auto log_det = [](const Eigen::LLT<Matrix>& llt) {
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  };
  const Eigen::LLT<Matrix> within(eye + 2.0 * cov / s2);
  const Eigen::LLT<Matrix> shifted(cov + s2 * eye);
  if (within.info() != Eigen::Success || shifted.info() != Eigen::Success) {
    throw NumericalError("mmd2_gaussian_vs_samples: covariance is not positive semidefinite");
  }
  const double mu_mu = std::exp(-0.5 * log_det(within));
  const double cross_scale =
      std::exp(-0.5 * (log_det(shifted) - static_cast<double>(d) * std::log(s2)));
  const Matrix centered = (samples.rowwise() - mean.transpose()).transpose();
  const Matrix solved = shifted.solve(centered);
  const Vector quad = centered.cwiseProduct(solved).colwise().sum().transpose();
  const double cross = cross_scale * (-0.5 * quad.array()).exp().mean();
  const PointSet ps = PointSet::uniform(samples);
  const double emp = weighted_gram_mean(ps, ps, bandwidth);
  return std::max(0.0, mu_mu - 2.0 * cross + emp);
}

std::vector<ConcentrationRow> run_concentration(const ConcentrationConfig& cfg,
                                                std::size_t workers) {
  cfg.validate();
  const GaussianParams mu(cfg.mean, cfg.covariance);
  const PreparedGaussian prepared(mu);
  Eigen::LLT<Matrix> llt(mu.covariance());
  Matrix lower;
  if (llt.info() == Eigen::Success) {
    lower = llt.matrixL();
  } else {
    // Singular covariance: factor through the eigendecomposition.
    const SymEig eig = sym_eig(mu.covariance());
    lower = eig.eigenvectors * eig.eigenvalues.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  const double d = static_cast<double>(cfg.mean.size());
  const double c_v = cfg.c_v.value_or(mu.covariance().trace());
  const double c_sigma = cfg.c_sigma.value_or(sym_eigenvalues(mu.covariance()).maxCoeff());

  std::vector<ConcentrationRow> rows;
  for (std::size_t a = 0; a < cfg.n_grid.size(); ++a) {
    const std::size_t n = cfg.n_grid[a];
    std::vector<double> dist_bures(cfg.trials), dist_mmd(cfg.trials);
    parallel_for(cfg.trials, workers, [&](std::size_t t) {
      std::mt19937_64 rng(derive_seed(cfg.seed, {a, t}));
      const Matrix samples = sample_gaussian(rng, cfg.mean, lower, n);
      const PreparedGaussian fit(gaussian_fit(samples));
      dist_bures[t] = bures_wasserstein(prepared, fit);
      dist_mmd[t] =
          std::sqrt(mmd2_gaussian_vs_samples(cfg.mean, mu.covariance(), samples,
                                             cfg.kernel_bandwidth));
    });
    for (double eps : cfg.eps_grid) {
      ConcentrationRow row;
      row.n = n;
      row.eps = eps;
      const auto trials = static_cast<double>(cfg.trials);
      row.freq_bures =
          static_cast<double>(std::count_if(dist_bures.begin(), dist_bures.end(),
                                            [&](double x) { return x > eps; })) / trials;
      row.freq_mmd = static_cast<double>(std::count_if(dist_mmd.begin(), dist_mmd.end(),
                                                       [&](double x) { return x > eps; })) /
                     trials;
      row.bound_bures = bures_deviation_bound(static_cast<double>(n), d, eps, c_v, c_sigma);
      row.bound_mmd = mmd_deviation_bound(static_cast<double>(n), cfg.kernel_bound, eps);
      row.exceeds_bures = row.freq_bures > row.bound_bures;
      row.exceeds_mmd = row.freq_mmd > row.bound_mmd;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string concentration_csv(const std::vector<ConcentrationRow>& rows) {
  std::string out =
      "n,eps,freq_bures,bound_bures,exceeds_bures,freq_mmd,bound_mmd,exceeds_mmd\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n) + "," + csv::format_double(r.eps) + "," +
           csv::format_double(r.freq_bures) + "," + csv::format_double(r.bound_bures) + "," +
           (r.exceeds_bures ? "1" : "0") + "," + csv::format_double(r.freq_mmd) + "," +
           csv::format_double(r.bound_mmd) + "," + (r.exceeds_mmd ? "1" : "0") + "\n";
  }
  return out;
}

std::vector<GoodnessReport> goodness_curve(const DistributionDataset& ds,
                                           const DissimilaritySpec& spec,
                                           const std::vector<double>& gammas,
                                           std::size_t workers) {
  if (gammas.empty()) throw InvalidArgument("goodness: empty gamma grid");
  const auto all = iota(0, ds.size());
  const DistanceMatrix d = pairwise_matrix(ds, all, all, spec, workers);
  const auto labels = ds.labels();
  std::vector<GoodnessReport> out;
  for (double g : gammas) out.push_back(goodness_estimate(d.values, labels, g));
  return out;
}

std::string goodness_csv(const std::vector<GoodnessReport>& reports) {
  std::string out = "gamma,epsilon_hat\n";
  for (const auto& r : reports) {
    out += csv::format_double(r.gamma) + "," + csv::format_double(r.epsilon_hat) + "\n";
  }
  return out;
}

}  // namespace distclass
