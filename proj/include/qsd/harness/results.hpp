#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qsd::harness {

/// Ordered "key=value;key=value" parameter text of a record.
class Params {
 public:
  Params& operator()(const std::string& key, double value);
  Params& operator()(const std::string& key, std::int64_t value);
  Params& operator()(const std::string& key, std::size_t value) { return (*this)(key, static_cast<std::int64_t>(value)); }
  Params& operator()(const std::string& key, int value) { return (*this)(key, static_cast<std::int64_t>(value)); }
  Params& operator()(const std::string& key, const std::string& value);
  Params& operator()(const std::string& key, const char* value) { return (*this)(key, std::string(value)); }
  const std::string& str() const noexcept { return text_; }
  operator std::string() const { return text_; }  // NOLINT(google-explicit-constructor)

 private:
  std::string text_;
};

struct Record {
  std::string experiment;
  std::string quantity;
  std::string params;
  double estimate = 0.0;
  double std_error = 0.0;
  /// "exact", "replica", "batch-means", "pooled" or "regression".
  std::string se_method = "exact";
  std::optional<double> reference;
  std::uint64_t seed = 0;

  bool operator==(const Record&) const = default;
};

struct ResultTable {
  std::string toolkit_version;
  std::uint64_t seed = 0;
  std::string model_digest;
  std::string config_digest;
  std::vector<Record> records;

  /// Appends a record stamped with the table seed; std_error must be >= 0.
  Record& add(std::string experiment, std::string quantity, std::string params, double estimate, double std_error,
              std::string se_method, std::optional<double> reference = std::nullopt);
  /// Rows with the given quantity, in order.
  std::vector<const Record*> select(const std::string& quantity) const;

  bool operator==(const ResultTable&) const = default;
};

enum class Format { kCsv, kJson };

std::string to_csv(const ResultTable& table);
std::string to_json(const ResultTable& table);
ResultTable parse_csv(const std::string& text);
ResultTable parse_json(const std::string& text);

/// Writes the table; throws Error when the path is not writable.
void emit(const ResultTable& table, Format format, const std::filesystem::path& path);

}  // namespace qsd::harness
