#include "hlreg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "hlreg/rng.hpp"

namespace hlreg {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!cells.empty() && !cells.back().empty() && cells.back().back() == '\r') {
    cells.back().pop_back();
  }
  return cells;
}

double parse_cell(const std::string& cell, std::size_t line_no, const std::string& col) {
  std::size_t begin = cell.find_first_not_of(" \t");
  if (begin == std::string::npos) {
    throw std::runtime_error("csv: missing value at line " + std::to_string(line_no) +
                             ", column " + col);
  }
  const std::size_t end = cell.find_last_not_of(" \t") + 1;
  double value = 0.0;
  const char* first = cell.data() + begin;
  const char* last = cell.data() + end;
  if (first != last && *first == '+') ++first;  // from_chars rejects a leading +
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw std::runtime_error("csv: cannot parse '" + cell + "' as a real at line " +
                             std::to_string(line_no) + ", column " + col);
  }
  if (!std::isfinite(value)) {
    throw std::runtime_error("csv: nonfinite value at line " + std::to_string(line_no) +
                             ", column " + col);
  }
  return value;
}

int resolve_column(const std::string& ref, const std::vector<std::string>& names) {
  const auto it = std::find(names.begin(), names.end(), ref);
  if (it != names.end()) return static_cast<int>(it - names.begin());
  int idx = -1;
  auto [ptr, ec] = std::from_chars(ref.data(), ref.data() + ref.size(), idx);
  if (ec == std::errc() && ptr == ref.data() + ref.size() && idx >= 0 &&
      idx < static_cast<int>(names.size())) {
    return idx;
  }
  throw std::runtime_error("csv: no column named '" + ref + "'");
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema, std::string name) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> colnames;

  if (schema.header) {
    if (!std::getline(in, line)) throw std::runtime_error("csv: empty file " + path);
    ++line_no;
    colnames = split_line(line, schema.delimiter);
  }

  std::vector<std::vector<double>> rows;
  std::size_t arity = colnames.size();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.peek() == EOF) break;  // trailing newline
    const auto cells = split_line(line, schema.delimiter);
    if (arity == 0) {
      arity = cells.size();
      colnames.resize(arity);
      for (std::size_t i = 0; i < arity; ++i) colnames[i] = std::to_string(i);
    }
    if (cells.size() != arity) {
      throw std::runtime_error("csv: line " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(arity));
    }
    std::vector<double> row(arity);
    for (std::size_t i = 0; i < arity; ++i) {
      row[i] = parse_cell(cells[i], line_no, colnames[i]);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("csv: no data rows in " + path);

  const int target = resolve_column(schema.target_column, colnames);
  std::vector<bool> dropped(arity, false);
  dropped[target] = true;
  for (const auto& ref : schema.drop_columns) dropped[resolve_column(ref, colnames)] = true;

  const int d = static_cast<int>(std::count(dropped.begin(), dropped.end(), false));
  if (d == 0) throw std::runtime_error("csv: schema drops every feature column");

  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), d);
  ds.targets.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    int c = 0;
    for (std::size_t i = 0; i < arity; ++i) {
      if (!dropped[i]) ds.features(static_cast<Eigen::Index>(r), c++) = rows[r][i];
    }
    ds.targets[static_cast<Eigen::Index>(r)] = rows[r][static_cast<std::size_t>(target)];
  }
  ds.name = name.empty() ? path : std::move(name);
  ds.provenance = path;
  return ds;
}

Split split_dataset(int n, double test_fraction, uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("split: test fraction must lie in (0, 1)");
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(seed);
  rng.shuffle(order);
  const int n_test = static_cast<int>(std::llround(n * test_fraction));
  Split s;
  s.test.assign(order.begin(), order.begin() + n_test);
  s.train.assign(order.begin() + n_test, order.end());
  return s;
}

Split split_dataset(int n, const SplitSpec& spec, uint64_t seed) {
  if (spec.mode == SplitSpec::Mode::kRandom) return split_dataset(n, spec.test_fraction, seed);
  if (spec.train_count <= 0 || spec.test_count <= 0 ||
      spec.train_count + spec.test_count > n) {
    throw std::invalid_argument("split: head/tail counts do not fit the dataset");
  }
  Split s;
  s.train.resize(spec.train_count);
  s.test.resize(spec.test_count);
  std::iota(s.train.begin(), s.train.end(), 0);
  std::iota(s.test.begin(), s.test.end(), spec.train_count);
  return s;
}

void subsample(std::vector<int>& indices, int count) {
  if (count > 0 && count < static_cast<int>(indices.size())) indices.resize(count);
}

Dataset take(const Dataset& ds, const std::vector<int>& indices) {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), ds.feature_dim());
  out.targets.resize(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(indices[i]);
    out.targets[static_cast<Eigen::Index>(i)] = ds.targets[indices[i]];
  }
  out.name = ds.name;
  out.provenance = ds.provenance;
  return out;
}

Standardizer fit_standardizer(const Eigen::MatrixXd& train_features) {
  if (train_features.rows() == 0) throw std::invalid_argument("standardize: empty training set");
  Standardizer s;
  const double n = static_cast<double>(train_features.rows());
  s.mean = train_features.colwise().sum() / n;
  s.std.resize(train_features.cols());
  for (Eigen::Index c = 0; c < train_features.cols(); ++c) {
    const double var = (train_features.col(c).array() - s.mean[c]).square().sum() / n;
    s.std[c] = std::sqrt(var);
    if (s.std[c] == 0.0) {
      s.std[c] = 1.0;
      s.constant_features.push_back(static_cast<int>(c));
    }
  }
  return s;
}

void Standardizer::apply(Eigen::MatrixXd& features) const {
  if (features.cols() != mean.size()) throw std::invalid_argument("standardize: width mismatch");
  features.rowwise() -= mean.transpose();
  features.array().rowwise() /= std.transpose().array();
}

TargetTransform fit_target_transform(const Eigen::VectorXd& train_targets,
                                     TargetTransform::Mode mode) {
  TargetTransform t;
  t.mode = mode;
  if (mode == TargetTransform::Mode::kMinMax01) {
    t.train_min = train_targets.minCoeff();
    t.train_max = train_targets.maxCoeff();
    if (t.train_max == t.train_min) {
      throw std::invalid_argument("target transform: degenerate training range");
    }
  }
  return t;
}

double TargetTransform::forward(double y) const {
  if (mode == Mode::kIdentity) return y;
  return (y - train_min) / (train_max - train_min);
}

double TargetTransform::inverse(double t) const {
  if (mode == Mode::kIdentity) return t;
  return train_min + t * (train_max - train_min);
}

Eigen::VectorXd TargetTransform::forward(const Eigen::VectorXd& y) const {
  Eigen::VectorXd out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = forward(y[i]);
  return out;
}

std::vector<std::vector<int>> minibatches(int n, int batch_size, uint64_t epoch_seed) {
  if (batch_size < 1) throw std::invalid_argument("minibatches: batch size must be positive");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(epoch_seed);
  rng.shuffle(order);
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    const int end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

}  // namespace hlreg
