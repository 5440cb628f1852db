#include "ssreg/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ssreg {

std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& cell) {
  if (cell.empty()) return true;
  std::string lower = cell;
  std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
  return lower == "na" || lower == "nan";
}

std::optional<double> parse_double(const std::string& cell) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells = split_line(line);
    for (auto& c : cells) c = trim(c);
    if (table.header.empty()) {
      table.header = cells;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " cells, found " +
                      std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw DataError(path + ": empty file");
  return table;
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::string>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << header << "\n";
  for (const auto& row : rows) out << row << "\n";
  if (!out) throw DataError("write failed: " + path);
}

Dataset load_dataset(const std::string& labeled_path, const std::string& unlabeled_path,
                     const std::string& response, bool impute_mean,
                     std::vector<std::string>* covariate_names) {
  CsvTable lab = read_csv(labeled_path);
  if (lab.rows.empty()) throw DataError(labeled_path + ": no data rows");

  Index response_col = -1;
  std::vector<std::string> cov_names;
  std::vector<Index> cov_cols;
  for (std::size_t c = 0; c < lab.header.size(); ++c) {
    if (lab.header[c] == response) {
      if (response_col >= 0) throw DataError(labeled_path + ": duplicate response column");
      response_col = static_cast<Index>(c);
    } else {
      cov_names.push_back(lab.header[c]);
      cov_cols.push_back(static_cast<Index>(c));
    }
  }
  if (response_col < 0) {
    throw DataError(labeled_path + ": response column '" + response + "' not found");
  }
  if (cov_names.empty()) throw DataError(labeled_path + ": no covariate columns");

  const Index p = static_cast<Index>(cov_names.size());
  const Index n = static_cast<Index>(lab.rows.size());

  bool has_unlabeled = !unlabeled_path.empty();
  CsvTable unl;
  Index N = 0;
  if (has_unlabeled) {
    unl = read_csv(unlabeled_path);
    if (unl.header != cov_names) {
      throw DataError(unlabeled_path + ": covariate headers do not match the labeled file");
    }
    N = static_cast<Index>(unl.rows.size());
  }

  Matrix xl(n, p);
  Vector y(n);
  Matrix xu(N, p);
  struct Missing {
    bool labeled;
    Index row, col;
  };
  std::vector<Missing> missing;

  for (Index i = 0; i < n; ++i) {
    const auto& row = lab.rows[static_cast<std::size_t>(i)];
    const std::string& ycell = row[static_cast<std::size_t>(response_col)];
    auto yv = parse_double(ycell);
    if (!yv) {
      throw DataError(labeled_path + ":" + std::to_string(i + 2) + ": non-numeric response '" +
                      ycell + "'");
    }
    y(i) = *yv;
    for (Index j = 0; j < p; ++j) {
      const std::string& cell = row[static_cast<std::size_t>(cov_cols[static_cast<std::size_t>(j)])];
      if (is_missing(cell)) {
        if (!impute_mean) {
          throw DataError(labeled_path + ":" + std::to_string(i + 2) + ": missing value in column '" +
                          cov_names[static_cast<std::size_t>(j)] + "' (enable --impute-mean)");
        }
        missing.push_back({true, i, j});
        xl(i, j) = 0.0;
        continue;
      }
      auto v = parse_double(cell);
      if (!v) {
        throw DataError(labeled_path + ":" + std::to_string(i + 2) + ": non-numeric value '" + cell +
                        "' in column '" + cov_names[static_cast<std::size_t>(j)] + "'");
      }
      xl(i, j) = *v;
    }
  }
  for (Index u = 0; u < N; ++u) {
    const auto& row = unl.rows[static_cast<std::size_t>(u)];
    for (Index j = 0; j < p; ++j) {
      const std::string& cell = row[static_cast<std::size_t>(j)];
      if (is_missing(cell)) {
        if (!impute_mean) {
          throw DataError(unlabeled_path + ":" + std::to_string(u + 2) +
                          ": missing value in column '" + cov_names[static_cast<std::size_t>(j)] +
                          "' (enable --impute-mean)");
        }
        missing.push_back({false, u, j});
        xu(u, j) = 0.0;
        continue;
      }
      auto v = parse_double(cell);
      if (!v) {
        throw DataError(unlabeled_path + ":" + std::to_string(u + 2) + ": non-numeric value '" +
                        cell + "' in column '" + cov_names[static_cast<std::size_t>(j)] + "'");
      }
      xu(u, j) = *v;
    }
  }

  if (!missing.empty()) {
    // column means over observed entries, pooled across both files
    Vector sums = xl.colwise().sum();
    if (N > 0) sums += xu.colwise().sum();
    Vector counts = Vector::Constant(p, static_cast<double>(n + N));
    for (const auto& m : missing) counts(m.col) -= 1.0;
    for (Index j = 0; j < p; ++j) {
      if (counts(j) <= 0) {
        throw DataError("column '" + cov_names[static_cast<std::size_t>(j)] +
                        "' has no observed values to impute from");
      }
    }
    Vector means = sums.cwiseQuotient(counts);
    for (const auto& m : missing) {
      if (m.labeled) {
        xl(m.row, m.col) = means(m.col);
      } else {
        xu(m.row, m.col) = means(m.col);
      }
    }
  }

  if (covariate_names) *covariate_names = cov_names;
  return make_dataset(std::move(xl), std::move(y), std::move(xu));
}

}  // namespace ssreg
