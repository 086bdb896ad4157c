#include "distclass/dataset_io.hpp"

#include "distclass/csv.hpp"
#include "distclass/error.hpp"

#include <json.hpp>

#include <cstdio>

namespace distclass {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kFormatTag = "distclass-dataset";

std::string item_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "items/%06zu.csv", i);
  return buf;
}

std::string point_set_csv(const PointSet& ps) {
  const bool weighted = !ps.has_uniform_weights();
  std::string out;
  const Matrix& pts = ps.points();
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      if (j) out += ',';
      out += csv::format_double(pts(i, j));
    }
    if (weighted) {
      if (pts.cols() > 0) out += ',';
      out += csv::format_double(ps.weights()[i]);
    }
    out += '\n';
  }
  return out;
}

std::string gaussian_csv(const GaussianParams& g) {
  Matrix m(g.dim() + 1, g.dim());
  m.row(0) = g.mean().transpose();
  m.bottomRows(static_cast<Eigen::Index>(g.dim())) = g.covariance();
  return csv::format_matrix(m);
}

PointSet point_set_from_table(const csv::Table& t, std::size_t dim, const std::string& source,
                              std::size_t text_size) {
  if (t.rows.empty()) {
    throw ParseError(source, text_size, "empty distribution");
  }
  const std::size_t width = t.rows.front().size();
  if (width != dim && width != dim + 1) {
    throw ParseError(source, t.row_offsets.front(),
                     "expected " + std::to_string(dim) + " or " + std::to_string(dim + 1) +
                         " columns, found " + std::to_string(width));
  }
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  Matrix pts(n, static_cast<Eigen::Index>(dim));
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    if (row.size() != width) {
      throw ParseError(source, t.row_offsets[static_cast<std::size_t>(i)],
                       "row has " + std::to_string(row.size()) + " columns, expected " +
                           std::to_string(width));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      pts(i, static_cast<Eigen::Index>(j)) = row[j];
    }
    if (width == dim + 1) {
      w[i] = row[dim];
    }
  }
  if (width == dim) {
    return PointSet::uniform(std::move(pts));
  }
  return PointSet(std::move(pts), std::move(w));
}

GaussianParams gaussian_from_table(const csv::Table& t, std::size_t dim, const std::string& source,
                                   std::size_t text_size) {
  if (t.rows.size() != dim + 1) {
    const std::size_t at = t.rows.size() < dim + 1 ? text_size : t.row_offsets[dim + 1];
    throw ParseError(source, at,
                     "gaussian payload needs " + std::to_string(dim + 1) + " rows, found " +
                         std::to_string(t.rows.size()));
  }
  const auto d = static_cast<Eigen::Index>(dim);
  Vector mean(d);
  Matrix cov(d, d);
  for (std::size_t r = 0; r <= dim; ++r) {
    const auto& row = t.rows[r];
    if (row.size() != dim) {
      throw ParseError(source, t.row_offsets[r],
                       "row has " + std::to_string(row.size()) + " columns, expected " +
                           std::to_string(dim));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      if (r == 0) {
        mean[static_cast<Eigen::Index>(j)] = row[j];
      } else {
        cov(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(j)) = row[j];
      }
    }
  }
  return GaussianParams(std::move(mean), std::move(cov));
}

template <class T>
T required(const json& obj, const char* key, const std::string& source) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(source, 0, std::string("missing field '") + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(source, 0, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

void save_dataset(const DistributionDataset& ds, const fs::path& dir) {
  ds.validate();
  fs::create_directories(dir / "items");

  json manifest;
  manifest["format"] = kFormatTag;
  manifest["version"] = kDatasetFormatVersion;
  manifest["dimension"] = ds.dimension;
  manifest["codebook"] = ds.codebook;
  manifest["items"] = json::array();
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    const auto& item = ds.items[i];
    const std::string file = item_file_name(i);
    std::string body;
    std::string kind;
    if (const auto* ps = std::get_if<PointSet>(&item.payload)) {
      kind = "pointset";
      body = point_set_csv(*ps);
    } else {
      kind = "gaussian";
      body = gaussian_csv(std::get<GaussianParams>(item.payload));
    }
    csv::write_file(dir / file, body);
    manifest["items"].push_back({{"label", item.label}, {"kind", kind}, {"file", file}});
  }
  csv::write_file(dir / kManifest, manifest.dump(2) + "\n");
}

DistributionDataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifest;
  const std::string source = manifest_path.string();
  const std::string text = csv::read_file(manifest_path);
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, e.byte, "malformed manifest");
  }
  if (required<std::string>(manifest, "format", source) != kFormatTag) {
    throw ParseError(source, 0, "not a distclass dataset manifest");
  }
  const int version = required<int>(manifest, "version", source);
  if (version != kDatasetFormatVersion) {
    throw ParseError(source, 0, "unsupported format version " + std::to_string(version));
  }

  DistributionDataset ds;
  ds.dimension = required<std::size_t>(manifest, "dimension", source);
  ds.codebook = required<std::vector<std::string>>(manifest, "codebook", source);
  const auto items = required<json>(manifest, "items", source);
  if (!items.is_array()) {
    throw ParseError(source, 0, "'items' must be an array");
  }
  ds.items.reserve(items.size());
  for (const auto& entry : items) {
    const int label = required<int>(entry, "label", source);
    const auto kind = required<std::string>(entry, "kind", source);
    const auto file = required<std::string>(entry, "file", source);
    const fs::path payload_path = dir / file;
    const std::string payload_text = csv::read_file(payload_path);
    const auto table = csv::parse_numeric(payload_text, payload_path.string());
    if (kind == "pointset") {
      ds.items.push_back({point_set_from_table(table, ds.dimension, payload_path.string(),
                                               payload_text.size()),
                          label});
    } else if (kind == "gaussian") {
      ds.items.push_back({gaussian_from_table(table, ds.dimension, payload_path.string(),
                                              payload_text.size()),
                          label});
    } else {
      throw ParseError(source, 0, "unknown payload kind '" + kind + "'");
    }
  }
  ds.validate();
  return ds;
}

PointSet load_point_set_csv(const fs::path& file, std::size_t dim) {
  const std::string text = csv::read_file(file);
  const auto table = csv::parse_numeric(text, file.string(), true);
  return point_set_from_table(table, dim, file.string(), text.size());
}

}  // namespace distclass
