#include "upgnn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "upgnn/errors.hpp"

namespace upgnn {

std::vector<std::size_t> Dataset::labeled_users() const {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < label_mask.size(); ++u) {
    if (label_mask[u]) out.push_back(u);
  }
  return out;
}

namespace {

// One parsed table: header fields plus rows of string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (const char c : line) {
    if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (first) {
      table.header = std::move(cells);
      first = false;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw IngestError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(table.header.size()) +
                        " columns, found " + std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (first) throw IngestError(path + ": missing header row");
  return table;
}

void require_header(const CsvTable& table,
                    const std::vector<std::string>& expected,
                    const std::string& path) {
  if (table.header != expected) {
    std::ostringstream expect;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) expect << ',';
      expect << expected[i];
    }
    std::ostringstream got;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      if (i) got << ',';
      got << table.header[i];
    }
    throw IngestError(path + ": header must be '" + expect.str() +
                      "', found '" + got.str() + "'");
  }
}

double parse_double(const std::string& cell, const std::string& where) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    throw IngestError(where + ": non-numeric field '" + cell + "'");
  }
  return value;
}

}  // namespace

LoadResult load_dataset(const std::string& edges_path,
                        const std::string& features_path,
                        const std::string& labels_path) {
  const CsvTable edges_table = read_csv(edges_path);
  require_header(edges_table, {"user_id", "item_id"}, edges_path);

  const CsvTable features_table = read_csv(features_path);
  if (features_table.header.size() < 2 ||
      features_table.header[0] != "user_id") {
    throw IngestError(features_path +
                      ": header must be 'user_id,f0,...,f{d-1}'");
  }
  const std::size_t d = features_table.header.size() - 1;
  std::vector<std::string> expected_features{"user_id"};
  for (std::size_t j = 0; j < d; ++j) {
    expected_features.push_back("f" + std::to_string(j));
  }
  require_header(features_table, expected_features, features_path);

  const CsvTable labels_table = read_csv(labels_path);
  require_header(labels_table, {"user_id", "treatment", "outcome"},
                 labels_path);

  // The feature table defines the user universe; IDs are sorted
  // lexicographically so ingestion is independent of row order.
  std::map<std::string, std::size_t> user_index;
  for (const auto& row : features_table.rows) {
    if (!user_index.emplace(row[0], 0).second) {
      throw IngestError(features_path + ": duplicate feature row for user '" +
                        row[0] + "'");
    }
  }
  {
    std::size_t next = 0;
    for (auto& [id, idx] : user_index) idx = next++;
  }
  const std::size_t n = user_index.size();

  std::map<std::string, std::size_t> product_index;
  for (const auto& row : edges_table.rows) {
    product_index.emplace(row[1], 0);
  }
  {
    std::size_t next = 0;
    for (auto& [id, idx] : product_index) idx = next++;
  }
  const std::size_t m = product_index.size();

  // Edges, deduplicated with a count.
  std::set<std::pair<std::size_t, std::size_t>> edge_set;
  std::size_t duplicates = 0;
  for (const auto& row : edges_table.rows) {
    const auto uit = user_index.find(row[0]);
    if (uit == user_index.end()) {
      throw IngestError(edges_path + ": user '" + row[0] +
                        "' has no feature row");
    }
    const std::size_t p = product_index.at(row[1]);
    if (!edge_set.emplace(uit->second, p).second) ++duplicates;
  }

  Dataset ds;
  ds.graph = BipartiteGraph(
      n, m,
      std::vector<std::pair<std::size_t, std::size_t>>(edge_set.begin(),
                                                       edge_set.end()));

  ds.user_ids.resize(n);
  for (const auto& [id, idx] : user_index) ds.user_ids[idx] = id;
  ds.product_ids.resize(m);
  for (const auto& [id, idx] : product_index) ds.product_ids[idx] = id;

  ds.x_u = Matrix<double>(n, d);
  for (const auto& row : features_table.rows) {
    const std::size_t u = user_index.at(row[0]);
    for (std::size_t j = 0; j < d; ++j) {
      ds.x_u(u, j) = parse_double(row[1 + j], features_path);
    }
  }

  // Products carry one-hot features.
  ds.x_p = Matrix<double>(m, m);
  for (std::size_t p = 0; p < m; ++p) ds.x_p(p, p) = 1.0;

  ds.treatment.assign(n, 0);
  ds.outcome.assign(n, 0.0);
  ds.label_mask.assign(n, 0);
  for (const auto& row : labels_table.rows) {
    const auto uit = user_index.find(row[0]);
    if (uit == user_index.end()) {
      throw IngestError(labels_path + ": label for unknown user '" + row[0] +
                        "'");
    }
    const std::size_t u = uit->second;
    if (ds.label_mask[u]) {
      throw IngestError(labels_path + ": duplicate label row for user '" +
                        row[0] + "'");
    }
    if (row[1] != "0" && row[1] != "1") {
      throw IngestError(labels_path + ": treatment must be 0 or 1, found '" +
                        row[1] + "'");
    }
    ds.treatment[u] = row[1] == "1" ? 1 : 0;
    ds.outcome[u] = parse_double(row[2], labels_path);
    ds.label_mask[u] = 1;
  }

  return LoadResult{std::move(ds), duplicates};
}

Matrix<double> normalize_features(const Matrix<double>& x) {
  Matrix<double> out(x.rows(), x.cols());
  if (x.rows() == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) mean += x(i, j);
    mean *= inv_n;
    double var = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double c = x(i, j) - mean;
      var += c * c;
    }
    var *= inv_n;
    const double stddev = std::sqrt(var);
    if (stddev < 1e-12) {
      for (std::size_t i = 0; i < x.rows(); ++i) out(i, j) = 0.0;
    } else {
      const double inv_std = 1.0 / stddev;
      for (std::size_t i = 0; i < x.rows(); ++i) {
        out(i, j) = (x(i, j) - mean) * inv_std;
      }
    }
  }
  return out;
}

}  // namespace upgnn
