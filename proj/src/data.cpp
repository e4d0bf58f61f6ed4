#include "tnqmm/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tnqmm/errors.hpp"

namespace tnqmm {

using nlohmann::json;

CategoricalDataset::CategoricalDataset(std::vector<int> dims, std::vector<int> symbols)
    : dims_(std::move(dims)), symbols_(std::move(symbols)) {
  validate();
}

void CategoricalDataset::append(std::span<const int> row) {
  if (row.size() != dims_.size())
    throw DataError("row has " + std::to_string(row.size()) + " symbols, expected " + std::to_string(dims_.size()));
  for (std::size_t i = 0; i < row.size(); ++i)
    if (row[i] < 0 || row[i] >= dims_[i])
      throw DataError("symbol " + std::to_string(row[i]) + " out of range at position " + std::to_string(i));
  symbols_.insert(symbols_.end(), row.begin(), row.end());
}

CategoricalDataset CategoricalDataset::subset(std::span<const std::size_t> rows) const {
  CategoricalDataset out;
  out.dims_ = dims_;
  out.coding = coding;
  out.column_names = column_names;
  out.provenance = provenance;
  out.symbols_.reserve(rows.size() * dims_.size());
  for (std::size_t r : rows) {
    if (r >= size()) throw DataError("row index out of range");
    auto v = row(r);
    out.symbols_.insert(out.symbols_.end(), v.begin(), v.end());
    if (!labels.empty()) out.labels.push_back(labels[r]);
  }
  return out;
}

void CategoricalDataset::validate() const {
  if (dims_.empty()) {
    if (!symbols_.empty()) throw DataError("symbols without positions");
    return;
  }
  for (int d : dims_)
    if (d < 1) throw DataError("alphabet sizes must be positive");
  if (symbols_.size() % dims_.size() != 0) throw DataError("ragged symbol storage");
  for (std::size_t k = 0; k < symbols_.size(); ++k) {
    const std::size_t i = k % dims_.size();
    if (symbols_[k] < 0 || symbols_[k] >= dims_[i])
      throw DataError("symbol " + std::to_string(symbols_[k]) + " out of range at row " +
                      std::to_string(k / dims_.size()) + ", position " + std::to_string(i));
  }
  if (!labels.empty() && labels.size() != size()) throw DataError("label count does not match row count");
  if (!coding.empty()) {
    if (coding.size() != dims_.size()) throw DataError("coding table count does not match positions");
    for (std::size_t i = 0; i < dims_.size(); ++i)
      if (static_cast<int>(coding[i].size()) != dims_[i]) throw DataError("coding table size mismatch at position " + std::to_string(i));
  }
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    char c = line[k];
    if (c == '"') {
      if (quoted && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else {
        quoted = !quoted;
      }
    } else if (c == delim && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else if (delim == ' ' && !quoted && (c == '\t')) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  if (delim == ' ' || delim == '\t')
    out.erase(std::remove(out.begin(), out.end(), std::string{}), out.end());
  return out;
}

std::size_t resolve_column(const std::string& key, const std::vector<std::string>& header, std::size_t width) {
  if (!header.empty()) {
    auto it = std::find(header.begin(), header.end(), key);
    if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
  }
  try {
    std::size_t used = 0;
    long v = std::stol(key, &used);
    if (used == key.size() && v >= 0 && static_cast<std::size_t>(v) < width) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw DataError("unknown column '" + key + "'");
}

}  // namespace

CategoricalDataset parse_csv(const std::string& text, const CsvSchema& schema, const std::string& provenance) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::vector<std::string> header;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line, schema.delimiter);
    if (schema.header && header.empty()) {
      header = std::move(fields);
      continue;
    }
    rows.push_back(std::move(fields));
    line_numbers.push_back(lineno);
  }
  if (rows.empty()) throw DataError(provenance + ": no data rows");
  const std::size_t width = header.empty() ? rows.front().size() : header.size();
  for (std::size_t k = 0; k < rows.size(); ++k)
    if (rows[k].size() != width)
      throw DataError(provenance + ": ragged row at line " + std::to_string(line_numbers[k]) + " (" +
                      std::to_string(rows[k].size()) + " fields, expected " + std::to_string(width) + ")");

  std::optional<std::size_t> label;
  if (schema.label_column) label = resolve_column(*schema.label_column, header, width);
  std::vector<std::size_t> keep;
  if (schema.columns.empty()) {
    for (std::size_t c = 0; c < width; ++c)
      if (!label || c != *label) keep.push_back(c);
  } else {
    for (const auto& key : schema.columns) {
      std::size_t c = resolve_column(key, header, width);
      if (label && c == *label) throw DataError("column '" + key + "' is also the label column");
      keep.push_back(c);
    }
  }
  if (keep.empty()) throw DataError(provenance + ": no columns selected");

  const std::size_t N = keep.size();
  std::vector<std::map<std::string, int>> index(N);
  CategoricalDataset out;
  out.coding.assign(N, {});
  std::vector<int> symbols;
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& row = rows[k];
    bool missing = false;
    for (std::size_t c : keep) {
      if (row[c] == schema.missing_token) missing = true;
      else if (row[c].empty())
        throw DataError(provenance + ": empty field at line " + std::to_string(line_numbers[k]) +
                        " is not the declared missing token '" + schema.missing_token + "'");
    }
    if (missing && schema.missing_policy == MissingPolicy::DropRow) continue;
    for (std::size_t j = 0; j < N; ++j) {
      const std::string& tok = row[keep[j]];
      auto [it, inserted] = index[j].try_emplace(tok, static_cast<int>(out.coding[j].size()));
      if (inserted) out.coding[j].push_back(tok);
      symbols.push_back(it->second);
    }
    if (label) labels.push_back(row[*label]);
  }
  if (symbols.empty()) throw DataError(provenance + ": no rows left after missing-value handling");

  std::vector<int> dims(N);
  for (std::size_t j = 0; j < N; ++j) dims[j] = static_cast<int>(out.coding[j].size());
  auto coding = std::move(out.coding);
  out = CategoricalDataset(dims, std::move(symbols));
  out.coding = std::move(coding);
  for (std::size_t c : keep) out.column_names.push_back(header.empty() ? std::to_string(c) : header[c]);
  out.labels = std::move(labels);

  std::ostringstream prov;
  prov << provenance << " n=" << out.size() << " N=" << N << " d=[";
  for (std::size_t j = 0; j < N; ++j) prov << (j ? "," : "") << dims[j];
  prov << "] missing=" << (schema.missing_policy == MissingPolicy::DropRow ? "drop-row" : "own-category");
  out.provenance = prov.str();
  return out;
}

CategoricalDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read dataset file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str(), schema, path.filename().string());
}

void write_csv(const CategoricalDataset& data, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  const bool decode = data.coding.size() == data.dims().size();
  for (std::size_t r = 0; r < data.size(); ++r) {
    auto row = data.row(r);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) f << ',';
      if (decode) f << data.coding[i][row[i]];
      else f << row[i];
    }
    f << '\n';
  }
}

void save_dataset(const CategoricalDataset& data, const std::filesystem::path& path) {
  data.validate();
  json h;
  h["format"] = "tnqmm-dataset";
  h["version"] = 1;
  h["dims"] = data.dims();
  h["rows"] = data.size();
  h["coding"] = data.coding;
  h["column_names"] = data.column_names;
  if (!data.labels.empty()) h["labels"] = data.labels;
  h["provenance"] = data.provenance;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << h.dump() << '\n';
  for (std::size_t r = 0; r < data.size(); ++r) {
    auto row = data.row(r);
    for (std::size_t i = 0; i < row.size(); ++i) f << (i ? " " : "") << row[i];
    f << '\n';
  }
}

CategoricalDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read dataset file " + path.string());
  std::string first;
  std::getline(f, first);
  json h;
  try {
    h = json::parse(first);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": bad dataset header: " + e.what());
  }
  if (h.value("format", "") != "tnqmm-dataset") throw DataError(path.string() + ": not a dataset file");
  std::vector<int> dims;
  std::size_t rows = 0;
  try {
    dims = h.at("dims").get<std::vector<int>>();
    rows = h.at("rows").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": bad dataset header: " + e.what());
  }
  std::vector<int> symbols;
  symbols.reserve(rows * dims.size());
  int v;
  while (f >> v) symbols.push_back(v);
  if (!f.eof()) throw DataError(path.string() + ": non-integer symbol in body");
  if (symbols.size() != rows * dims.size()) throw DataError(path.string() + ": body does not match header row count");
  CategoricalDataset out(std::move(dims), std::move(symbols));
  out.coding = h.value("coding", std::vector<std::vector<std::string>>{});
  out.column_names = h.value("column_names", std::vector<std::string>{});
  out.labels = h.value("labels", std::vector<std::string>{});
  out.provenance = h.value("provenance", std::string{});
  out.validate();
  return out;
}

CategoricalDataset load_any(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read dataset file " + path.string());
  char c = 0;
  f >> c;
  if (c == '{') return load_dataset(path);
  return load_csv(path, schema);
}

std::pair<CategoricalDataset, CategoricalDataset> split(const CategoricalDataset& data, double fraction,
                                                        std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw DataError("split fraction must lie in (0, 1)");
  const std::size_t n = data.size();
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n)
    throw DataError("split of " + std::to_string(n) + " rows at fraction " + std::to_string(fraction) +
                    " leaves an empty part");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  // Fisher-Yates with raw engine output so the permutation is portable.
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng() % (i + 1)]);
  std::vector<std::size_t> a(perm.begin(), perm.begin() + n_train), b(perm.begin() + n_train, perm.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {data.subset(a), data.subset(b)};
}

double EmpiricalDistribution::frequency(const std::vector<int>& seq) const {
  auto it = counts.find(seq);
  if (it == counts.end() || total == 0) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(total);
}

EmpiricalDistribution empirical_distribution(const CategoricalDataset& data) {
  double states = 1.0;
  for (int d : data.dims()) states *= d;
  if (states > 1e6) throw StateSpaceTooLarge("empirical distribution needs prod(d_i) <= 1e6");
  EmpiricalDistribution out;
  out.dims = data.dims();
  out.total = data.size();
  for (std::size_t r = 0; r < data.size(); ++r) {
    auto row = data.row(r);
    ++out.counts[std::vector<int>(row.begin(), row.end())];
  }
  return out;
}

DatasetStats dataset_stats(const CategoricalDataset& data) {
  DatasetStats s;
  s.rows = data.size();
  s.length = data.length();
  s.dims = data.dims();
  std::set<std::vector<int>> seen;
  for (std::size_t r = 0; r < data.size(); ++r) seen.emplace(data.row(r).begin(), data.row(r).end());
  s.distinct_rows = seen.size();
  return s;
}

}  // namespace tnqmm
