#include "distclass/toygen.hpp"

#include "distclass/csv.hpp"
#include "distclass/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>

namespace distclass {

namespace fs = std::filesystem;

namespace {

// Whitespace tokenizer that remembers byte offsets and skips # comments.
class OffTokens {
 public:
  OffTokens(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  std::size_t offset() const { return pos_; }

  std::string_view next() {
    skip();
    if (pos_ >= text_.size()) {
      throw ParseError(source_, pos_, "unexpected end of OFF file");
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '#') {
      ++pos_;
    }
    return std::string_view(text_).substr(start, pos_ - start);
  }

  template <typename T>
  T number() {
    skip();
    const std::size_t at = pos_;
    const std::string_view tok = next();
    T value{};
    const char* first = tok.data();
    if (!tok.empty() && tok.front() == '+') ++first;
    const auto [end, ec] = std::from_chars(first, tok.data() + tok.size(), value);
    if (ec != std::errc() || end != tok.data() + tok.size()) {
      throw ParseError(source_, at, "expected a number, got '" + std::string(tok) + "'");
    }
    return value;
  }

  // Consumes a leading "OFF" keyword; a count glued to it ("OFF8") is left
  // in the stream.
  void header() {
    skip();
    if (text_.compare(pos_, 3, "OFF") != 0) {
      throw ParseError(source_, pos_, "missing OFF header");
    }
    pos_ += 3;
  }

 private:
  void skip() {
    while (pos_ < text_.size()) {
      if (std::isspace(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      } else if (text_[pos_] == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& text_;
  std::string source_;
  std::size_t pos_ = 0;
};

Matrix read_xyz_csv(const fs::path& file) {
  const auto table = csv::read_numeric_file(file, true);
  Matrix m(static_cast<Eigen::Index>(table.rows.size()), 3);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (table.rows[r].size() != 3) {
      throw ParseError(file.string(), table.row_offsets[r],
                       "expected 3 columns (x,y,z), got " + std::to_string(table.rows[r].size()));
    }
    for (Eigen::Index k = 0; k < 3; ++k) {
      m(static_cast<Eigen::Index>(r), k) = table.rows[r][static_cast<std::size_t>(k)];
    }
  }
  return m;
}

std::mt19937_64 file_rng(std::uint64_t seed, const std::string& cls, const std::string& file) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed),
                                   static_cast<std::uint32_t>(seed >> 32)};
  for (unsigned char ch : cls) words.push_back(ch);
  words.push_back(0x2f);
  for (unsigned char ch : file) words.push_back(ch);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

Matrix subsample_rows(const Matrix& m, std::size_t k, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(m.rows());
  if (k == 0 || k >= n) return m;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  Matrix out(static_cast<Eigen::Index>(k), m.cols());
  for (std::size_t r = 0; r < k; ++r) {
    out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(idx[r]));
  }
  return out;
}

bool has_extension(const fs::path& p, const char* ext) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e == ext;
}

std::string xyz_rows(const Matrix& m) { return csv::format_matrix(m, {"x", "y", "z"}); }

std::string off_text(const Matrix& m) {
  std::string out = "OFF\n" + std::to_string(m.rows()) + " 0 0\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += csv::format_double(m(i, 0)) + " " + csv::format_double(m(i, 1)) + " " +
           csv::format_double(m(i, 2)) + "\n";
  }
  return out;
}

}  // namespace

Matrix read_off_vertices(const fs::path& file) {
  const std::string text = csv::read_file(file);
  OffTokens tok(text, file.string());
  tok.header();
  const auto nv = tok.number<long long>();
  const auto nf = tok.number<long long>();
  tok.number<long long>();
  if (nv < 0 || nf < 0) {
    throw ParseError(file.string(), tok.offset(), "negative element count");
  }
  Matrix m(static_cast<Eigen::Index>(nv), 3);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < 3; ++k) m(i, k) = tok.number<double>();
  }
  return m;
}

DistributionDataset load_point_cloud_dir(const fs::path& dir, const PointCloudOptions& options) {
  if (!fs::is_directory(dir)) {
    throw InvalidArgument("point cloud directory not found: " + dir.string());
  }
  std::vector<fs::path> classes;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) classes.push_back(entry.path());
  }
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) {
    throw InvalidArgument("no class subdirectories in " + dir.string());
  }
  DistributionDataset ds;
  ds.dimension = 3;
  for (const auto& cls : classes) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(cls)) {
      if (entry.is_regular_file() &&
          (has_extension(entry.path(), ".off") || has_extension(entry.path(), ".csv"))) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      throw InvalidArgument("class directory has no .off or .csv files: " + cls.string());
    }
    const int label = static_cast<int>(ds.codebook.size());
    const std::string name = cls.filename().string();
    ds.codebook.push_back(name);
    for (const auto& file : files) {
      Matrix pts;
      try {
        pts = has_extension(file, ".off") ? read_off_vertices(file) : read_xyz_csv(file);
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        throw InvalidArgument("cannot read " + file.string() + ": " + e.what());
      }
      if (pts.rows() == 0) {
        throw InvalidArgument("no points in " + file.string());
      }
      auto rng = file_rng(options.seed, name, file.filename().string());
      pts = subsample_rows(pts, options.subsample, rng);
      if (options.center) {
        const Eigen::RowVectorXd centroid = pts.colwise().mean();
        pts.rowwise() -= centroid;
      }
      ds.items.push_back({PointSet::uniform(std::move(pts)), label});
    }
  }
  return ds;
}

void write_shape_corpus(const fs::path& dir, const ShapeCorpusSpec& spec) {
  if (spec.per_class == 0 || spec.points == 0) {
    throw InvalidArgument("shape corpus: counts must be positive");
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double pi = std::numbers::pi;
  // Sphere r = 1 and box half-side sqrt(3/5) share E[x^2] = 1/3.
  const double half_side = std::sqrt(3.0 / 5.0);
  const double major = 0.8;
  const double minor = 0.3;

  auto sphere = [&](double s) {
    Eigen::Vector3d v(normal(rng), normal(rng), normal(rng));
    return Eigen::Vector3d(s * v.normalized());
  };
  auto box = [&](double s) {
    const auto face = static_cast<int>(std::min(5.0, std::floor(6.0 * unit(rng))));
    Eigen::Vector3d v;
    for (int k = 0; k < 3; ++k) v[k] = (2.0 * unit(rng) - 1.0) * half_side;
    v[face / 2] = face % 2 == 0 ? half_side : -half_side;
    return Eigen::Vector3d(s * v);
  };
  auto torus = [&](double s) {
    const double theta = 2.0 * pi * unit(rng);
    double phi = 0.0;
    do {
      phi = 2.0 * pi * unit(rng);
    } while (unit(rng) * (major + minor) > major + minor * std::cos(phi));
    const double ring = major + minor * std::cos(phi);
    return Eigen::Vector3d(s * ring * std::cos(theta), s * ring * std::sin(theta),
                           s * minor * std::sin(phi));
  };

  struct Shape {
    const char* name;
    std::function<Eigen::Vector3d(double)> draw;
  };
  const Shape shapes[] = {{"box", box}, {"sphere", sphere}, {"torus", torus}};
  for (const auto& shape : shapes) {
    const fs::path sub = dir / shape.name;
    fs::create_directories(sub);
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      const double s = 1.0 + spec.scale_jitter * (2.0 * unit(rng) - 1.0);
      const Eigen::Vector3d offset(2.0 * unit(rng) - 1.0, 2.0 * unit(rng) - 1.0,
                                   2.0 * unit(rng) - 1.0);
      Matrix pts(static_cast<Eigen::Index>(spec.points), 3);
      for (Eigen::Index r = 0; r < pts.rows(); ++r) {
        Eigen::Vector3d p = shape.draw(s) + offset;
        for (int k = 0; k < 3; ++k) p[k] += spec.noise * normal(rng);
        pts.row(r) = p.transpose();
      }
      char stem[32];
      std::snprintf(stem, sizeof stem, "%s_%03zu", shape.name, i);
      const bool as_off = std::string(shape.name) == "box" && i % 2 == 1;
      if (as_off) {
        csv::write_file(sub / (std::string(stem) + ".off"), off_text(pts));
      } else {
        csv::write_file(sub / (std::string(stem) + ".csv"), xyz_rows(pts));
      }
    }
  }
}

}  // namespace distclass
