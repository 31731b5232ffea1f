#include "lapace/data/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "lapace/error.hpp"

namespace lapace::data {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  cells.push_back(std::move(cell));
  for (auto& c : cells) {
    const auto b = c.find_first_not_of(" \t");
    const auto e = c.find_last_not_of(" \t");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

double parse_number(const std::string& text, const std::string& column, std::size_t line) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || text.empty() || !std::isfinite(value)) {
    throw SchemaError("line " + std::to_string(line) + ": column '" + column +
                      "' is not numeric: '" + text + "'");
  }
  return value;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

const std::vector<int>& Dataset::predicted() const {
  if (!y_pred) throw ValidationError("dataset has not been relabelled by a classifier");
  return *y_pred;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.schema = schema;
  out.X = Tensor::zeros(indices.size(), width());
  if (y_pred) out.y_pred.emplace();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= size()) throw ShapeError("subset: row index out of range");
    std::copy(row(i).begin(), row(i).end(), out.X.row_span(k).begin());
    out.y_star.push_back(y_star.at(i));
    if (y_pred) out.y_pred->push_back((*y_pred)[i]);
  }
  return out;
}

RawTable Dataset::to_raw() const {
  RawTable raw{schema, {}, y_star};
  raw.rows.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) raw.rows.push_back(schema.decode(row(i)));
  return raw;
}

Dataset encode(const RawTable& raw) {
  if (!raw.schema.is_fitted()) throw SchemaError("schema normalization is not fitted");
  Dataset out;
  out.schema = raw.schema;
  out.X = Tensor::zeros(raw.rows.size(), raw.schema.encoded_width());
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    const auto enc = raw.schema.encode(raw.rows[i]);
    std::copy(enc.begin(), enc.end(), out.X.row_span(i).begin());
  }
  out.y_star = raw.labels;
  if (out.y_star.empty()) out.y_star.assign(raw.rows.size(), 0);
  return out;
}

RawTable read_csv(const std::string& path, const TabularSchema& schema, bool require_label) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open CSV file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV file '" + path + "' is empty");
  const auto header = split_line(line);

  std::vector<std::size_t> feature_col(schema.num_features());
  for (std::size_t f = 0; f < schema.num_features(); ++f) {
    const auto& name = schema.features()[f].name;
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw SchemaError("CSV file '" + path + "' is missing column '" + name + "'");
    }
    feature_col[f] = static_cast<std::size_t>(it - header.begin());
  }
  std::optional<std::size_t> label_col;
  if (const auto it = std::find(header.begin(), header.end(), schema.label_name());
      it != header.end()) {
    label_col = static_cast<std::size_t>(it - header.begin());
  } else if (require_label) {
    throw SchemaError("CSV file '" + path + "' is missing label column '" +
                      schema.label_name() + "'");
  }

  RawTable table{schema, {}, {}};
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw SchemaError("line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header.size()));
    }
    RawRow row(schema.num_features());
    for (std::size_t f = 0; f < schema.num_features(); ++f) {
      const auto& feat = schema.features()[f];
      const auto& cell = cells[feature_col[f]];
      if (feat.kind == FeatureKind::kContinuous) {
        row[f] = parse_number(cell, feat.name, line_no);
      } else {
        row[f] = static_cast<double>(schema.level_index(f, cell));
      }
    }
    table.rows.push_back(std::move(row));
    if (label_col) {
      const double lab = parse_number(cells[*label_col], schema.label_name(), line_no);
      if (lab != std::round(lab) || lab < 0 || lab >= static_cast<double>(schema.num_classes())) {
        throw SchemaError("line " + std::to_string(line_no) + ": label " + cells[*label_col] +
                          " outside [0, " + std::to_string(schema.num_classes()) + ")");
      }
      table.labels.push_back(static_cast<int>(lab));
    }
  }
  return table;
}

void write_csv(const std::string& path, const RawTable& table) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write CSV file '" + path + "'");
  const auto& schema = table.schema;
  for (std::size_t f = 0; f < schema.num_features(); ++f) {
    out << quote_if_needed(schema.features()[f].name) << ',';
  }
  out << quote_if_needed(schema.label_name()) << '\n';
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (std::size_t f = 0; f < schema.num_features(); ++f) {
      out << quote_if_needed(schema.format_value(f, table.rows[i][f])) << ',';
    }
    out << (table.labels.empty() ? 0 : table.labels[i]) << '\n';
  }
}

Dataset load_csv(const std::string& path, TabularSchema& schema) {
  RawTable raw = read_csv(path, schema);
  if (!schema.is_fitted()) {
    raw.schema.fit(raw.rows);
    schema = raw.schema;
  }
  return encode(raw);
}

std::vector<std::vector<std::size_t>> split_indices(std::size_t n, const SplitSpec& spec) {
  if (spec.fractions.empty()) throw ConfigError("split: no fractions given");
  double total = 0.0;
  for (double f : spec.fractions) {
    if (!(f > 0.0)) throw ConfigError("split: fractions must be positive");
    total += f;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> parts;
  std::size_t start = 0;
  for (std::size_t k = 0; k < spec.fractions.size(); ++k) {
    const bool last = k + 1 == spec.fractions.size();
    const std::size_t count =
        last ? n - start
             : static_cast<std::size_t>(std::floor(spec.fractions[k] * static_cast<double>(n) + 1e-9));
    if (count == 0) {
      throw ConfigError("split: partition " + std::to_string(k) + " of " + std::to_string(n) +
                        " rows would be empty");
    }
    std::vector<std::size_t> part(order.begin() + static_cast<std::ptrdiff_t>(start),
                                  order.begin() + static_cast<std::ptrdiff_t>(start + count));
    std::sort(part.begin(), part.end());
    parts.push_back(std::move(part));
    start += count;
  }
  return parts;
}

std::vector<Dataset> split(const Dataset& dataset, const SplitSpec& spec) {
  std::vector<Dataset> out;
  for (const auto& part : split_indices(dataset.size(), spec)) out.push_back(dataset.subset(part));
  return out;
}

std::vector<RawTable> split(const RawTable& table, const SplitSpec& spec) {
  std::vector<RawTable> out;
  for (const auto& part : split_indices(table.rows.size(), spec)) {
    RawTable t{table.schema, {}, {}};
    for (std::size_t i : part) {
      t.rows.push_back(table.rows[i]);
      if (!table.labels.empty()) t.labels.push_back(table.labels[i]);
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace lapace::data
