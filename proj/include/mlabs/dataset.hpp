#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "mlabs/errors.hpp"
#include "mlabs/tensor_basis.hpp"

namespace mlabs {

/// Range of one predictor column, plus its expansion by multiplier E.
struct ColumnRange {
  double min;
  double max;

  double range() const { return max - min; }
  Interval expanded(double E) const { return {min - E * range(), max + E * range()}; }
};

/// Predictors X (n x p) and response y (length n).
class Dataset {
 public:
  Dataset() = default;

  Dataset(Matrix X, Vector y, std::vector<std::string> names = {})
      : X_(std::move(X)), y_(std::move(y)), names_(std::move(names)) {
    if (X_.rows() != y_.size()) throw InputError("X and y have different row counts");
    if (X_.rows() < 1 || X_.cols() < 1) throw InputError("dataset needs n >= 1 and p >= 1");
    if (!X_.allFinite() || !y_.allFinite()) throw InputError("dataset contains missing or non-finite values");
    if (names_.empty()) {
      for (Eigen::Index j = 0; j < X_.cols(); ++j) names_.push_back("x" + std::to_string(j + 1));
    }
    if (static_cast<Eigen::Index>(names_.size()) != X_.cols()) {
      throw InputError("predictor name count does not match column count");
    }
    ranges_.reserve(static_cast<std::size_t>(X_.cols()));
    for (Eigen::Index j = 0; j < X_.cols(); ++j) {
      ranges_.push_back({X_.col(j).minCoeff(), X_.col(j).maxCoeff()});
    }
  }

  const Matrix& X() const { return X_; }
  const Vector& y() const { return y_; }
  int n() const { return static_cast<int>(X_.rows()); }
  int p() const { return static_cast<int>(X_.cols()); }
  const std::vector<std::string>& names() const { return names_; }
  const ColumnRange& range(int j) const { return ranges_.at(static_cast<std::size_t>(j)); }
  Interval bounds(int j, double E) const { return range(j).expanded(E); }

  std::span<const double> row(int i) const {
    return {X_.data() + static_cast<Eigen::Index>(i) * X_.cols(), static_cast<std::size_t>(X_.cols())};
  }

  /// Rows selected by index, in the given order.
  Dataset subset(const std::vector<int>& rows) const {
    Matrix X(static_cast<Eigen::Index>(rows.size()), X_.cols());
    Vector y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      X.row(static_cast<Eigen::Index>(r)) = X_.row(rows[r]);
      y[static_cast<Eigen::Index>(r)] = y_[rows[r]];
    }
    return Dataset(std::move(X), std::move(y), names_);
  }

  /// Same predictors, different response.
  Dataset with_response(Vector y) const { return Dataset(X_, std::move(y), names_); }

 private:
  Matrix X_;
  Vector y_;
  std::vector<std::string> names_;
  std::vector<ColumnRange> ranges_;
};

// ---------------------------------------------------------------------------
// CSV exchange

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r\"");
    const auto e = cell.find_last_not_of(" \t\r\"");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_number(const std::string& s, int line_no) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw InputError("line " + std::to_string(line_no) + ": missing or non-numeric value '" + s + "'");
  }
  return v;
}

}  // namespace detail

inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = detail::split_csv_line(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw InputError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(table.header.size()) + " fields, got " +
                       std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(detail::parse_number(c, line_no));
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw InputError("CSV input is empty");
  if (table.rows.empty()) throw InputError("CSV input has a header but no rows");
  return table;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return read_csv(in);
}

/// Builds a dataset with `response` as y and every other column as a predictor.
inline Dataset dataset_from_table(const CsvTable& table, const std::string& response) {
  const auto it = std::find(table.header.begin(), table.header.end(), response);
  if (it == table.header.end()) throw ConfigError("response column '" + response + "' not found");
  const auto yc = static_cast<std::size_t>(it - table.header.begin());
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto p = static_cast<Eigen::Index>(table.header.size()) - 1;
  if (p < 1) throw InputError("no predictor columns besides the response");
  Matrix X(n, p);
  Vector y(n);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c != yc) names.push_back(table.header[c]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == yc) {
        y[i] = row[c];
      } else {
        X(i, j++) = row[c];
      }
    }
  }
  return Dataset(std::move(X), std::move(y), std::move(names));
}

/// Predictor-only matrix, using the columns in `names` order when given.
inline Matrix matrix_from_table(const CsvTable& table, const std::vector<std::string>& names) {
  std::vector<std::size_t> cols;
  for (const auto& name : names) {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) throw InputError("predictor column '" + name + "' not found");
    cols.push_back(static_cast<std::size_t>(it - table.header.begin()));
  }
  Matrix X(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table.rows[i][cols[j]];
    }
  }
  return X;
}

inline void write_dataset_csv(std::ostream& out, const Dataset& data, const std::string& response = "y") {
  out << std::setprecision(17);
  for (const auto& name : data.names()) out << name << ',';
  out << response << '\n';
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.p(); ++j) out << data.X()(i, j) << ',';
    out << data.y()[i] << '\n';
  }
}

inline Dataset load_dataset(const std::string& path, const std::string& response) {
  return dataset_from_table(read_csv_file(path), response);
}

}  // namespace mlabs
