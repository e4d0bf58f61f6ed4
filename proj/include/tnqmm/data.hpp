#pragma once

// Fixed-length categorical sequence datasets.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tnqmm {

class CategoricalDataset {
 public:
  CategoricalDataset() = default;
  CategoricalDataset(std::vector<int> dims, std::vector<int> symbols);

  std::size_t size() const { return length() == 0 ? 0 : symbols_.size() / dims_.size(); }
  int length() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  std::span<const int> row(std::size_t i) const {
    return {symbols_.data() + i * dims_.size(), dims_.size()};
  }
  const std::vector<int>& symbols() const { return symbols_; }

  void append(std::span<const int> row);
  CategoricalDataset subset(std::span<const std::size_t> rows) const;

  // Per-column token tables; coding[i][s] is the token coded as symbol s.
  std::vector<std::vector<std::string>> coding;
  std::vector<std::string> column_names;
  std::vector<std::string> labels;  // optional, one per row
  std::string provenance;

  // Throws DataError on out-of-range symbols or ragged storage.
  void validate() const;

  bool operator==(const CategoricalDataset& o) const {
    return dims_ == o.dims_ && symbols_ == o.symbols_ && coding == o.coding &&
           column_names == o.column_names && labels == o.labels && provenance == o.provenance;
  }

 private:
  std::vector<int> dims_;
  std::vector<int> symbols_;  // row-major n x N
};

enum class MissingPolicy { DropRow, OwnCategory };

struct CsvSchema {
  char delimiter = ',';
  bool header = false;
  std::string missing_token = "?";
  MissingPolicy missing_policy = MissingPolicy::OwnCategory;
  // Columns to keep (names when header is present, else 0-based indices as text).
  std::vector<std::string> columns;
  // Optional label column, kept out of the modeled variables.
  std::optional<std::string> label_column;
};

// Codes every kept column by first appearance of each token.
CategoricalDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
CategoricalDataset parse_csv(const std::string& text, const CsvSchema& schema = {},
                             const std::string& provenance = "<memory>");

// Decodes symbols back to tokens using the coding tables (or the integers).
void write_csv(const CategoricalDataset& data, const std::filesystem::path& path);

// Canonical dataset file: one JSON header line (dims, coding, provenance,...)
// followed by one whitespace-separated integer row per sequence.
void save_dataset(const CategoricalDataset& data, const std::filesystem::path& path);
CategoricalDataset load_dataset(const std::filesystem::path& path);
// Canonical file when the first character is '{', CSV otherwise.
CategoricalDataset load_any(const std::filesystem::path& path, const CsvSchema& schema = {});

// Train fraction in (0,1); deterministic in seed. Both parts are non-empty.
std::pair<CategoricalDataset, CategoricalDataset> split(const CategoricalDataset& data, double fraction,
                                                        std::uint64_t seed);

struct EmpiricalDistribution {
  std::vector<int> dims;
  std::size_t total = 0;
  std::map<std::vector<int>, std::size_t> counts;
  double frequency(const std::vector<int>& seq) const;
};

// Requires prod(d_i) <= 1e6.
EmpiricalDistribution empirical_distribution(const CategoricalDataset& data);

struct DatasetStats {
  std::size_t rows = 0;
  int length = 0;
  std::vector<int> dims;
  std::size_t distinct_rows = 0;
};
DatasetStats dataset_stats(const CategoricalDataset& data);

}  // namespace tnqmm
