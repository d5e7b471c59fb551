#include "fednam/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "fednam/rng.hpp"

namespace fednam {

namespace {

void stderr_sink(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

WarningSink& warning_sink() {
  static WarningSink sink = stderr_sink;
  return sink;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        current += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back(trim(current));
      current.clear();
    } else {
      current += ch;
    }
  }
  fields.emplace_back(trim(current));
  return fields;
}

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace

void set_warning_sink(WarningSink sink) { warning_sink() = sink ? std::move(sink) : WarningSink(stderr_sink); }

void warn(const std::string& message) { warning_sink()(message); }

std::size_t RawTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("column '" + std::string(name) + "' not found");
  return static_cast<std::size_t>(it - header.begin());
}

RawTable parse_csv(std::string_view text, const CsvOptions& options, std::string_view source) {
  const std::string src(source);
  std::vector<std::pair<std::size_t, std::vector<std::string>>> records;  // (line number, fields)
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    if (trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    records.emplace_back(line_no, split_fields(line));
    if (end == text.size()) break;
  }
  if (records.empty()) throw DataError(src + ": empty file");

  RawTable table;
  table.header = records.front().second;
  const std::size_t cols = table.header.size();
  if (records.size() == 1) throw DataError(src + ": header row but no data rows");

  std::vector<bool> categorical(cols, false);
  for (const auto& name : options.categorical_columns) {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it != table.header.end()) categorical[static_cast<std::size_t>(it - table.header.begin())] = true;
  }

  // Categorical columns that hold any non-numeric cell are label-encoded in sorted level order.
  std::vector<bool> encode(cols, false);
  std::vector<std::set<std::string>> level_sets(cols);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& [ln, fields] = records[r];
    if (fields.size() != cols) {
      throw DataError(src + ":" + std::to_string(ln) + ": expected " + std::to_string(cols) + " fields, found " +
                      std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (fields[c].empty()) {
        throw DataError(src + ":" + std::to_string(ln) + ": missing value in column '" + table.header[c] + "'");
      }
      if (categorical[c]) {
        level_sets[c].insert(fields[c]);
        if (!parse_number(fields[c])) encode[c] = true;
      }
    }
  }
  for (std::size_t c = 0; c < cols; ++c) {
    if (encode[c]) table.levels[table.header[c]].assign(level_sets[c].begin(), level_sets[c].end());
  }

  table.rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& [ln, fields] = records[r];
    std::vector<double> row(cols);
    for (std::size_t c = 0; c < cols; ++c) {
      if (encode[c]) {
        const auto& lv = table.levels[table.header[c]];
        row[c] = static_cast<double>(std::lower_bound(lv.begin(), lv.end(), fields[c]) - lv.begin());
        continue;
      }
      const auto value = parse_number(fields[c]);
      if (!value) {
        throw DataError(src + ":" + std::to_string(ln) + ": non-numeric value '" + fields[c] + "' in column '" +
                        table.header[c] + "'");
      }
      row[c] = *value;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

RawTable load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open CSV file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), options, path.string());
}

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Heart: return "heart";
    case DatasetKind::Wine: return "wine";
    case DatasetKind::Iris: return "iris";
  }
  return "unknown";
}

DatasetKind dataset_kind_from_string(std::string_view name) {
  if (name == "heart") return DatasetKind::Heart;
  if (name == "wine") return DatasetKind::Wine;
  if (name == "iris") return DatasetKind::Iris;
  throw ConfigError("unknown dataset '" + std::string(name) + "' (expected heart, wine or iris)");
}

const DatasetSchema& schema_for(DatasetKind kind) {
  static const DatasetSchema heart{{"age", "sex", "cp", "trestbps", "chol", "fbs", "restecg", "thalach", "exang",
                                    "oldpeak", "slope", "ca", "thal"},
                                   "target",
                                   {"thal"}};
  static const DatasetSchema wine{{"fixed acidity", "volatile acidity", "citric acid", "residual sugar", "chlorides",
                                   "free sulfur dioxide", "total sulfur dioxide", "density", "pH", "sulphates",
                                   "alcohol"},
                                  "quality",
                                  {}};
  static const DatasetSchema iris{{"sepal_length", "sepal_width", "petal_length", "petal_width"}, "species",
                                  {"species"}};
  switch (kind) {
    case DatasetKind::Heart: return heart;
    case DatasetKind::Wine: return wine;
    case DatasetKind::Iris: return iris;
  }
  return heart;
}

CsvOptions csv_options_for(DatasetKind kind) { return CsvOptions{schema_for(kind).categorical}; }

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.feature_names = feature_names;
  out.task = task;
  out.num_classes = num_classes;
  out.class_names = class_names;
  out.X = Matrix(indices.size(), X.cols());
  out.y.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = X.row(indices[r]);
    std::copy(src.begin(), src.end(), out.X.row(r).begin());
    out.y.push_back(y[indices[r]]);
  }
  return out;
}

Dataset Dataset::concat(std::span<const Dataset> parts) {
  if (parts.empty()) throw ShapeError("concat: no datasets");
  Dataset out;
  out.feature_names = parts[0].feature_names;
  out.task = parts[0].task;
  out.num_classes = parts[0].num_classes;
  out.class_names = parts[0].class_names;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.X.cols() != parts[0].X.cols()) throw ShapeError("concat: feature count mismatch");
    rows += p.size();
  }
  out.X = Matrix(rows, parts[0].X.cols());
  std::size_t r = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < p.size(); ++i, ++r) {
      const auto src = p.X.row(i);
      std::copy(src.begin(), src.end(), out.X.row(r).begin());
    }
    out.y.insert(out.y.end(), p.y.begin(), p.y.end());
  }
  return out;
}

Scaler Scaler::fit(const Matrix& X, std::span<const std::string> feature_names) {
  if (X.rows() == 0) throw DataError("scaler: no training rows");
  Scaler s;
  const std::size_t n = X.rows();
  s.mean.assign(X.cols(), 0.0);
  s.stddev.assign(X.cols(), 0.0);
  for (std::size_t c = 0; c < X.cols(); ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) sum += X(r, c);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) ss += (X(r, c) - mean) * (X(r, c) - mean);
    double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0.0)) {
      const std::string name = c < feature_names.size() ? feature_names[c] : std::to_string(c);
      warn("feature '" + name + "' is constant on the training split; using std=1");
      sd = 1.0;
    }
    s.mean[c] = mean;
    s.stddev[c] = sd;
  }
  return s;
}

Matrix Scaler::transform(const Matrix& X) const {
  if (X.cols() != mean.size()) throw ShapeError("scaler: feature count mismatch");
  Matrix out(X.rows(), X.cols());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t c = 0; c < X.cols(); ++c) out(r, c) = (X(r, c) - mean[c]) / stddev[c];
  }
  return out;
}

void SplitSpec::validate() const {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("split.test_fraction must lie in (0,1)");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("split.val_fraction must lie in (0,1)");
}

Dataset extract_dataset(const RawTable& raw, DatasetKind kind, const PreprocessOptions& options) {
  const auto& schema = schema_for(kind);
  const std::string target = options.target_col.value_or(schema.target);
  const std::size_t target_idx = raw.column(target);

  std::vector<std::size_t> feature_cols;
  Dataset ds;
  if (options.target_col) {
    for (std::size_t c = 0; c < raw.num_cols(); ++c) {
      if (c != target_idx) feature_cols.push_back(c);
    }
  } else {
    for (const auto& name : schema.features) {
      if (std::find(raw.header.begin(), raw.header.end(), name) == raw.header.end()) {
        throw DataError("schema mismatch for dataset '" + std::string(to_string(kind)) + "': missing column '" +
                        name + "'");
      }
      feature_cols.push_back(raw.column(name));
    }
  }
  if (feature_cols.empty()) throw DataError("dataset has no feature columns");
  for (auto c : feature_cols) ds.feature_names.push_back(raw.header[c]);

  std::vector<std::size_t> keep;
  std::vector<int> labels;
  switch (kind) {
    case DatasetKind::Heart:
      ds.task = Task::Binary;
      ds.num_classes = 2;
      ds.class_names = {"0", "1"};
      for (std::size_t r = 0; r < raw.num_rows(); ++r) {
        const double t = raw.rows[r][target_idx];
        if (t != 0.0 && t != 1.0) throw DataError("heart target must be 0 or 1 (row " + std::to_string(r + 2) + ")");
        keep.push_back(r);
        labels.push_back(static_cast<int>(t));
      }
      break;
    case DatasetKind::Wine:
      ds.task = Task::Binary;
      ds.num_classes = 2;
      ds.class_names = {"quality<" + std::to_string(static_cast<int>(options.wine_threshold)),
                        "quality>=" + std::to_string(static_cast<int>(options.wine_threshold))};
      for (std::size_t r = 0; r < raw.num_rows(); ++r) {
        keep.push_back(r);
        labels.push_back(raw.rows[r][target_idx] >= options.wine_threshold ? 1 : 0);
      }
      break;
    case DatasetKind::Iris: {
      std::vector<std::string> names;
      if (const auto it = raw.levels.find(target); it != raw.levels.end()) {
        names = it->second;
      } else {
        names = {"0", "1", "2"};
      }
      for (std::size_t r = 0; r < raw.num_rows(); ++r) {
        const double t = raw.rows[r][target_idx];
        if (t < 0.0 || t != std::floor(t) || t >= static_cast<double>(names.size())) {
          throw DataError("iris target must be a class code in [0, C) (row " + std::to_string(r + 2) + ")");
        }
        if (options.iris_two_class && t > 1.0) continue;
        keep.push_back(r);
        labels.push_back(static_cast<int>(t));
      }
      if (options.iris_two_class) {
        names.resize(2);
        ds.task = Task::Binary;
        ds.num_classes = 2;
      } else {
        ds.task = Task::Multiclass;
        ds.num_classes = names.size();
      }
      ds.class_names = names;
      break;
    }
  }

  ds.X = Matrix(keep.size(), feature_cols.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    for (std::size_t f = 0; f < feature_cols.size(); ++f) ds.X(i, f) = raw.rows[keep[i]][feature_cols[f]];
  }
  ds.y = std::move(labels);
  return ds;
}

IndexSplit train_test_split(std::span<const int> labels, double test_fraction, bool stratified, std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (n < 2) throw DataError("train_test_split: need at least two rows");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must lie in (0,1)");
  Rng rng(seed);
  IndexSplit split;

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
  if (stratified) {
    for (const auto& [label, members] : by_class) {
      if (members.size() < 2) {
        warn("class " + std::to_string(label) + " has fewer than two members; falling back to an unstratified split");
        stratified = false;
        break;
      }
    }
  }

  auto take = [&](std::vector<std::size_t> members) {
    rng.shuffle(members);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
    n_test = std::min(n_test, members.size() - 1);
    split.test.insert(split.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
  };
  if (stratified) {
    for (const auto& [label, members] : by_class) take(members);
  } else {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    take(std::move(all));
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

PreparedData preprocess(const RawTable& raw, DatasetKind kind, const SplitSpec& split,
                        const PreprocessOptions& options) {
  split.validate();
  const Dataset full = extract_dataset(raw, kind, options);
  const auto idx = train_test_split(full.y, split.test_fraction, split.stratified, derive_seed(split.seed, {0x5e11}));
  PreparedData out;
  Dataset train = full.subset(idx.train);
  Dataset test = full.subset(idx.test);
  out.raw_train = train.X;
  out.scaler = Scaler::fit(train.X, train.feature_names);
  train.X = out.scaler.transform(train.X);
  test.X = out.scaler.transform(test.X);
  out.train = std::move(train);
  out.test = std::move(test);
  return out;
}

}  // namespace fednam
