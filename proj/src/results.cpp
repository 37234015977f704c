#include "qsd/harness/results.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qsd/errors.hpp"
#include "qsd/format.hpp"

namespace qsd::harness {

namespace {

void append(std::string& text, const std::string& key, const std::string& value) {
  if (key.find_first_of(",;=\"\n") != std::string::npos || value.find_first_of(",;=\"\n") != std::string::npos) {
    throw Error("parameter text may not contain , ; = \" or newlines: " + key + "=" + value);
  }
  if (!text.empty()) text += ';';
  text += key + '=' + value;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw Error("malformed number in result table: '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  char* end = nullptr;
  const auto v = std::strtoull(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') throw Error("malformed integer in result table: '" + s + "'");
  return v;
}

constexpr const char* kColumns = "experiment,quantity,params,estimate,std_error,se_method,reference,seed";

}  // namespace

Params& Params::operator()(const std::string& key, double value) {
  append(text_, key, fmt17(value));
  return *this;
}

Params& Params::operator()(const std::string& key, std::int64_t value) {
  append(text_, key, std::to_string(value));
  return *this;
}

Params& Params::operator()(const std::string& key, const std::string& value) {
  append(text_, key, value);
  return *this;
}

Record& ResultTable::add(std::string experiment, std::string quantity, std::string params, double estimate,
                         double std_error, std::string se_method, std::optional<double> reference) {
  if (!(std_error >= 0.0)) throw Error("standard errors must be >= 0 (" + quantity + ")");
  if (!std::isfinite(estimate)) throw Error("non-finite estimate for " + quantity);
  records.push_back({std::move(experiment), std::move(quantity), std::move(params), estimate, std_error,
                     std::move(se_method), reference, seed});
  return records.back();
}

std::vector<const Record*> ResultTable::select(const std::string& quantity) const {
  std::vector<const Record*> out;
  for (const auto& r : records) {
    if (r.quantity == quantity) out.push_back(&r);
  }
  return out;
}

std::string to_csv(const ResultTable& table) {
  std::string out;
  out += "# toolkit=qsdfv " + table.toolkit_version + "\n";
  out += "# seed=" + std::to_string(table.seed) + "\n";
  out += "# model_digest=" + table.model_digest + "\n";
  out += "# config_digest=" + table.config_digest + "\n";
  out += kColumns;
  out += '\n';
  for (const auto& r : table.records) {
    out += r.experiment + ',' + r.quantity + ',' + r.params + ',' + fmt17(r.estimate) + ',' + fmt17(r.std_error) + ',' +
           r.se_method + ',' + (r.reference ? fmt17(*r.reference) : std::string()) + ',' + std::to_string(r.seed) +
           '\n';
  }
  return out;
}

ResultTable parse_csv(const std::string& text) {
  ResultTable table;
  std::istringstream in(text);
  std::string line;
  bool columns_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2), value = line.substr(eq + 1);
      if (key == "toolkit") table.toolkit_version = value.substr(value.find(' ') + 1);
      if (key == "seed") table.seed = parse_u64(value);
      if (key == "model_digest") table.model_digest = value;
      if (key == "config_digest") table.config_digest = value;
      continue;
    }
    if (!columns_seen) {
      if (line != kColumns) throw Error("unexpected result table columns: " + line);
      columns_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != 8) throw Error("result row has " + std::to_string(cells.size()) + " cells: " + line);
    Record r{cells[0], cells[1], cells[2], parse_double(cells[3]), parse_double(cells[4]), cells[5], std::nullopt,
             parse_u64(cells[7])};
    if (!cells[6].empty()) r.reference = parse_double(cells[6]);
    table.records.push_back(std::move(r));
  }
  if (!columns_seen) throw Error("result table has no column header");
  return table;
}

std::string to_json(const ResultTable& table) {
  // Numbers go out as fmt17 text so every writer emits the same digits.
  std::string out = "{\n";
  out += "  \"toolkit\": " + nlohmann::json(std::string("qsdfv ") + table.toolkit_version).dump() + ",\n";
  out += "  \"seed\": " + std::to_string(table.seed) + ",\n";
  out += "  \"model_digest\": " + nlohmann::json(table.model_digest).dump() + ",\n";
  out += "  \"config_digest\": " + nlohmann::json(table.config_digest).dump() + ",\n";
  out += "  \"records\": [";
  for (std::size_t i = 0; i < table.records.size(); ++i) {
    const auto& r = table.records[i];
    out += i ? ",\n    {" : "\n    {";
    out += "\"experiment\": " + nlohmann::json(r.experiment).dump();
    out += ", \"quantity\": " + nlohmann::json(r.quantity).dump();
    out += ", \"params\": " + nlohmann::json(r.params).dump();
    out += ", \"estimate\": " + fmt17(r.estimate);
    out += ", \"std_error\": " + fmt17(r.std_error);
    out += ", \"se_method\": " + nlohmann::json(r.se_method).dump();
    out += ", \"reference\": " + (r.reference ? fmt17(*r.reference) : std::string("null"));
    out += ", \"seed\": " + std::to_string(r.seed) + "}";
  }
  out += table.records.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

ResultTable parse_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  ResultTable table;
  const std::string toolkit = doc.at("toolkit").get<std::string>();
  table.toolkit_version = toolkit.substr(toolkit.find(' ') + 1);
  table.seed = doc.at("seed").get<std::uint64_t>();
  table.model_digest = doc.at("model_digest").get<std::string>();
  table.config_digest = doc.at("config_digest").get<std::string>();
  for (const auto& j : doc.at("records")) {
    Record r;
    r.experiment = j.at("experiment").get<std::string>();
    r.quantity = j.at("quantity").get<std::string>();
    r.params = j.at("params").get<std::string>();
    r.estimate = j.at("estimate").get<double>();
    r.std_error = j.at("std_error").get<double>();
    r.se_method = j.at("se_method").get<std::string>();
    if (!j.at("reference").is_null()) r.reference = j.at("reference").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    table.records.push_back(std::move(r));
  }
  return table;
}

void emit(const ResultTable& table, Format format, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << (format == Format::kCsv ? to_csv(table) : to_json(table));
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace qsd::harness
