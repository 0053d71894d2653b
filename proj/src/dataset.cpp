#include "tsa/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "tsa/error.hpp"
#include "tsa/rng.hpp"

namespace tsa {

void Dataset::validate() const {
  const auto n = labels.size();
  const auto j = feature_names.size();
  if (n < 2) throw DataError("dataset needs at least 2 samples, got " + std::to_string(n));
  if (j < 1) throw DataError("dataset needs at least 1 feature");
  if (static_cast<std::size_t>(features.rows()) != n ||
      static_cast<std::size_t>(features.cols()) != j)
    throw DataError("feature matrix shape does not match labels/names");
  std::set<std::string> seen;
  for (const auto& name : feature_names)
    if (!seen.insert(name).second) throw DataError("duplicate feature name '" + name + "'");
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] != 1 && labels[r] != -1)
      throw DataError("label at row " + std::to_string(r) + " is not +1/-1");
    for (std::size_t c = 0; c < j; ++c)
      if (!std::isfinite(features(r, c)))
        throw DataError("non-finite value at row " + std::to_string(r) + ", column " +
                        std::to_string(c));
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.feature_names = feature_names;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::members(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] == f) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldAssignment::complement(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] != f) out.push_back(i);
  return out;
}

NormalizationStats zscore_fit(const Dataset& train) {
  const auto n = train.features.rows();
  const auto j = train.features.cols();
  if (n == 0) throw DataError("cannot fit normalization on an empty dataset");
  NormalizationStats stats;
  stats.means.resize(static_cast<std::size_t>(j));
  stats.stds.resize(static_cast<std::size_t>(j));
  for (Eigen::Index c = 0; c < j; ++c) {
    double sum = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double x = train.features(r, c);
      if (!std::isfinite(x))
        throw DataError("non-finite value in column " +
                        (static_cast<std::size_t>(c) < train.feature_names.size()
                             ? "'" + train.feature_names[static_cast<std::size_t>(c)] + "'"
                             : std::to_string(c)));
      sum += x;
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double d = train.features(r, c) - mean;
      ss += d * d;
    }
    stats.means[static_cast<std::size_t>(c)] = mean;
    stats.stds[static_cast<std::size_t>(c)] = std::sqrt(ss / static_cast<double>(n));
  }
  return stats;
}

namespace {

void check_dims(std::size_t j, const NormalizationStats& stats) {
  if (stats.means.size() != j || stats.stds.size() != j)
    throw DataError("normalization stats have " + std::to_string(stats.means.size()) +
                    " columns, data has " + std::to_string(j));
}

}  // namespace

Dataset zscore_apply(const Dataset& data, const NormalizationStats& stats) {
  check_dims(static_cast<std::size_t>(data.features.cols()), stats);
  Dataset out = data;
  for (Eigen::Index c = 0; c < out.features.cols(); ++c) {
    const double mean = stats.means[static_cast<std::size_t>(c)];
    const double sd = stats.stds[static_cast<std::size_t>(c)];
    for (Eigen::Index r = 0; r < out.features.rows(); ++r)
      out.features(r, c) = sd > 0.0 ? (out.features(r, c) - mean) / sd : 0.0;
  }
  return out;
}

Vector zscore_apply(const Vector& x, const NormalizationStats& stats) {
  check_dims(static_cast<std::size_t>(x.size()), stats);
  Vector out(x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    const double sd = stats.stds[static_cast<std::size_t>(c)];
    out[c] = sd > 0.0 ? (x[c] - stats.means[static_cast<std::size_t>(c)]) / sd : 0.0;
  }
  return out;
}

FoldAssignment kfold_split(const std::vector<int>& labels, int k, std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (k < 2) throw ConfigError("k-fold needs k >= 2");
  if (n < static_cast<std::size_t>(k))
    throw DataError("k-fold with k=" + std::to_string(k) + " needs at least k samples, got " +
                    std::to_string(n));
  Rng rng = derive_rng(seed, {0x6b666f6c64ULL});
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  FoldAssignment out;
  out.k = k;
  out.fold.assign(n, 0);
  // Rotating the starting fold keeps the extra samples of uneven splits
  // from always landing in fold 0.
  int next = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
  for (int cls : classes) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] == cls) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i : idx) {
      out.fold[i] = next;
      next = (next + 1) % k;
    }
  }
  return out;
}

FoldAssignment kfold_split(std::size_t n, int k, std::uint64_t seed) {
  return kfold_split(std::vector<int>(n, 1), k, seed);
}

Dataset inject_irrelevant_features(const Dataset& data, int count, std::uint64_t seed) {
  if (count < 0) throw ConfigError("irrelevant feature count must be >= 0");
  if (count == 0) return data;
  const auto n = data.features.rows();
  const auto j = data.features.cols();
  Dataset out;
  out.labels = data.labels;
  out.feature_names = data.feature_names;
  out.features.resize(n, j + count);
  out.features.leftCols(j) = data.features;
  Rng rng = derive_rng(seed, {0x6e6f697365ULL});
  std::normal_distribution<double> normal(0.0, 1.0);
  // Column-major draw order so column c is the same whatever `count` is.
  for (int c = 0; c < count; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) out.features(r, j + c) = normal(rng);
    out.feature_names.push_back("noise_" + std::to_string(c + 1));
  }
  return out;
}

TrainTestSplit stratified_split(const std::vector<int>& labels, double train_fraction,
                                std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0, 1)");
  Rng rng = derive_rng(seed, {0x73706c6974ULL});
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  // Largest-remainder quotas so the train total is round(fraction * N).
  std::vector<std::vector<std::size_t>> members(classes.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin();
    members[static_cast<std::size_t>(c)].push_back(i);
  }
  const auto total = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(labels.size())));
  std::vector<std::size_t> quota(classes.size());
  std::vector<double> remainder(classes.size());
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const double exact = train_fraction * static_cast<double>(members[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
    assigned += quota[c];
  }
  std::vector<std::size_t> order(classes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total && k < order.size(); ++k, ++assigned) ++quota[order[k]];

  std::vector<char> in_train(labels.size(), 0);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::shuffle(members[c].begin(), members[c].end(), rng);
    for (std::size_t t = 0; t < quota[c]; ++t) in_train[members[c][t]] = 1;
  }
  TrainTestSplit out;
  for (std::size_t i = 0; i < labels.size(); ++i) (in_train[i] ? out.train : out.test).push_back(i);
  return out;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
  return s.substr(b);
}

double parse_number(const std::string& cell, std::size_t line_no) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v))
    throw DataError("line " + std::to_string(line_no) + ": '" + cell + "' is not a finite number");
  return v;
}

}  // namespace

Dataset parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError("empty CSV");
  ++line_no;
  auto header = split_line(trim(line));
  for (auto& h : header) h = trim(h);
  if (header.size() < 2 || header.back() != "label")
    throw DataError("CSV header must list feature names followed by 'label'");
  Dataset data;
  data.feature_names.assign(header.begin(), header.end() - 1);
  const std::size_t j = data.feature_names.size();
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != j + 1)
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(j + 1) +
                      " fields, got " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < j; ++c) values.push_back(parse_number(trim(cells[c]), line_no));
    const std::string lab = trim(cells[j]);
    if (lab == "+1" || lab == "1")
      data.labels.push_back(1);
    else if (lab == "-1")
      data.labels.push_back(-1);
    else
      throw DataError("line " + std::to_string(line_no) + ": label '" + lab + "' is not +1/-1");
  }
  const auto n = static_cast<Eigen::Index>(data.labels.size());
  data.features = Eigen::Map<Matrix>(values.data(), n, static_cast<Eigen::Index>(j));
  data.validate();
  return data;
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string format_csv(const Dataset& data) {
  std::string out;
  for (const auto& name : data.feature_names) {
    out += name;
    out += ',';
  }
  out += "label\n";
  for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
      out += format_double(data.features(r, c));
      out += ',';
    }
    out += data.labels[static_cast<std::size_t>(r)] > 0 ? "+1\n" : "-1\n";
  }
  return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << format_csv(data);
}

}  // namespace tsa
