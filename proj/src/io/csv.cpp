#include "borrow/io/csv.hpp"

#include "borrow/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace borrow::io {

namespace {

// RFC 4180 style split: quoted fields may hold commas, doubled quotes and newlines.
bool read_record(std::istream& in, std::vector<std::string>& fields, int& line) {
  fields.clear();
  std::string field;
  bool quoted = false, any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      ++line;
      break;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw ParseError("line " + std::to_string(line) + ": unterminated quoted field");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

bool parse_double(const std::string& cell, double& out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

DataTable::DataTable(std::vector<std::string> names, std::vector<std::vector<std::string>> columns,
                     std::string source)
    : names_(std::move(names)), columns_(std::move(columns)), source_(std::move(source)) {}

bool DataTable::has_column(const std::string& name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

std::size_t DataTable::column_index(const std::string& name) const {
  for (std::size_t k = 0; k < names_.size(); ++k) {
    if (names_[k] == name) return k;
  }
  throw UnknownColumn("'" + name + "' is not a column of " + source_);
}

const std::vector<std::string>& DataTable::strings(const std::string& name) const {
  return columns_[column_index(name)];
}

Eigen::VectorXd DataTable::numeric(const std::string& name) const {
  const auto& col = strings(name);
  Eigen::VectorXd out(static_cast<Eigen::Index>(col.size()));
  for (std::size_t r = 0; r < col.size(); ++r) {
    double v;
    if (!parse_double(col[r], v)) {
      // Data line r sits on file line r + 2 (header first).
      throw ParseError(source_ + ": line " + std::to_string(r + 2) + ", field '" + name + "': '" + col[r] +
                       "' is not a number");
    }
    out(static_cast<Eigen::Index>(r)) = v;
  }
  return out;
}

bool DataTable::is_numeric(const std::string& name) const {
  double v;
  for (const auto& cell : strings(name)) {
    if (!parse_double(cell, v)) return false;
  }
  return true;
}

DataTable DataTable::without_rows(const std::vector<int>& sorted_unique_rows) const {
  std::vector<std::vector<std::string>> cols(columns_.size());
  std::size_t next = 0;
  for (std::size_t r = 0; r < rows(); ++r) {
    if (next < sorted_unique_rows.size() && static_cast<std::size_t>(sorted_unique_rows[next]) == r) {
      ++next;
      continue;
    }
    for (std::size_t k = 0; k < columns_.size(); ++k) cols[k].push_back(columns_[k][r]);
  }
  return DataTable(names_, std::move(cols), source_);
}

DataTable parse_csv(std::istream& in, const std::string& source) {
  int line = 1;
  std::vector<std::string> header;
  if (!read_record(in, header, line)) throw ParseError(source + ": empty file");
  for (auto& h : header) h = trim(h);
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
  for (std::size_t a = 0; a < header.size(); ++a) {
    if (header[a].empty()) throw ParseError(source + ": line 1, column " + std::to_string(a + 1) + " has no name");
    for (std::size_t b = 0; b < a; ++b) {
      if (header[a] == header[b]) throw ParseError(source + ": line 1: duplicate column '" + header[a] + "'");
    }
  }
  std::vector<std::vector<std::string>> cols(header.size());
  std::vector<std::string> fields;
  for (;;) {
    const int at = line;
    if (!read_record(in, fields, line)) break;
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
    if (fields.size() != header.size()) {
      throw ParseError(source + ": line " + std::to_string(at) + ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t k = 0; k < fields.size(); ++k) cols[k].push_back(trim(fields[k]));
  }
  return DataTable(std::move(header), std::move(cols), source);
}

DataTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& matrix) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ParseError("cannot write '" + path + "'");
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      std::fprintf(f, j == 0 ? "%.17g" : ",%.17g", matrix(i, j));
    }
    std::fputc('\n', f);
  }
  if (std::fclose(f) != 0) throw ParseError("failed writing '" + path + "'");
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::vector<std::string> fields;
  int line = 1;
  for (;;) {
    const int at = line;
    if (!read_record(in, fields, line)) break;
    std::vector<double> row;
    for (std::size_t k = 0; k < fields.size(); ++k) {
      double v;
      if (!parse_double(fields[k], v)) {
        throw ParseError(path + ": line " + std::to_string(at) + ", field " + std::to_string(k + 1) +
                         ": '" + fields[k] + "' is not a number");
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path + ": line " + std::to_string(at) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace borrow::io
