#include "distclass/csv.hpp"

#include "distclass/error.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace distclass::csv {

std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

}  // namespace

Table parse_numeric(std::string_view text, const std::string& source, bool allow_header) {
  Table table;
  std::size_t pos = 0;
  bool first_line = true;
  while (pos < text.size()) {
    const std::size_t line_end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, line_end - pos);
    const std::size_t line_start = pos;
    pos = line_end + 1;

    bool blank = true;
    for (char c : line) {
      if (!is_space(c)) {
        blank = false;
        break;
      }
    }
    if (blank) {
      continue;
    }

    std::vector<double> row;
    std::size_t field_start = 0;
    bool ok = true;
    std::size_t bad_offset = 0;
    while (true) {
      std::size_t field_end = line.find(',', field_start);
      if (field_end == std::string_view::npos) {
        field_end = line.size();
      }
      std::size_t b = field_start;
      std::size_t e = field_end;
      while (b < e && is_space(line[b])) ++b;
      while (e > b && is_space(line[e - 1])) --e;
      double value = 0.0;
      const char* first = line.data() + b;
      const char* last = line.data() + e;
      // from_chars rejects a leading '+'; accept it for friendliness.
      if (first != last && *first == '+') ++first;
      const auto res = std::from_chars(first, last, value);
      if (b == e || res.ec != std::errc() || res.ptr != last) {
        ok = false;
        bad_offset = line_start + b;
        break;
      }
      row.push_back(value);
      if (field_end == line.size()) {
        break;
      }
      field_start = field_end + 1;
    }
    if (!ok) {
      if (first_line && allow_header) {
        first_line = false;
        continue;
      }
      throw ParseError(source, bad_offset, "expected a number");
    }
    first_line = false;
    table.rows.push_back(std::move(row));
    table.row_offsets.push_back(line_start);
  }
  return table;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InvalidArgument("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw InvalidArgument("cannot write " + path.string());
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) {
    throw InvalidArgument("write failed: " + path.string());
  }
}

Table read_numeric_file(const std::filesystem::path& path, bool allow_header) {
  return parse_numeric(read_file(path), path.string(), allow_header);
}

std::string format_matrix(const Matrix& m, const std::vector<std::string>& header) {
  std::string out;
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (j) out += ',';
      out += header[j];
    }
    out += '\n';
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace distclass::csv
