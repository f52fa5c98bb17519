#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace borrow::io {

/// Column-major table of raw CSV cells; the first line is the header.
class DataTable {
 public:
  DataTable() = default;
  DataTable(std::vector<std::string> names, std::vector<std::vector<std::string>> columns, std::string source);

  std::size_t rows() const { return columns_.empty() ? 0 : columns_.front().size(); }
  const std::vector<std::string>& names() const { return names_; }
  bool has_column(const std::string& name) const;
  /// Throws UnknownColumn.
  std::size_t column_index(const std::string& name) const;
  const std::vector<std::string>& strings(const std::string& name) const;
  /// Every cell parsed as a double; ParseError names the line and field on failure.
  Eigen::VectorXd numeric(const std::string& name) const;
  bool is_numeric(const std::string& name) const;

  DataTable without_rows(const std::vector<int>& sorted_unique_rows) const;

  bool operator==(const DataTable& other) const { return names_ == other.names_ && columns_ == other.columns_; }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> columns_;
  std::string source_;
};

DataTable parse_csv(std::istream& in, const std::string& source = "<stream>");
DataTable read_csv(const std::string& path);

/// Strict double parse of a whole cell (surrounding blanks allowed).
bool parse_double(const std::string& cell, double& out);

/// Headerless CSV, 17 significant digits.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& matrix);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

std::string format_double(double v);

}  // namespace borrow::io
