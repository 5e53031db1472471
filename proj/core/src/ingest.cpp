#include "tsr/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>

#include "tsr/error.hpp"

namespace tsr {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::optional<double> parse_number(const std::string& text) {
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

/// Numeric timestamps compare numerically; anything else (ISO dates)
/// lexicographically.
bool strictly_before(const std::string& a, const std::string& b) {
  const auto na = parse_number(a);
  const auto nb = parse_number(b);
  if (na && nb) return *na < *nb;
  return a < b;
}

}  // namespace

void WindowSpec::validate() const {
  if (window_length < 2) throw ParameterError("window_length must be >= 2");
  if (stride < 1) throw ParameterError("stride must be >= 1");
}

PriceTable load_csv(const std::filesystem::path& path, const CsvColumns& columns) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw IngestError("empty file " + path.string(), 1);
  const auto header = split_csv_line(line);
  auto find_column = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (lower(trim(header[i])) == lower(name)) return i;
    }
    throw IngestError("missing column '" + name + "' in " + path.string(), 1);
  };
  const std::size_t date_col = find_column(columns.date);
  const std::size_t close_col = find_column(columns.close);

  PriceTable table;
  table.ticker = columns.ticker.empty() ? path.stem().string() : columns.ticker;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() <= std::max(date_col, close_col)) {
      throw IngestError("too few fields", row);
    }
    std::string stamp = trim(fields[date_col]);
    const std::string close_text = trim(fields[close_col]);
    if (stamp.empty()) throw IngestError("missing timestamp", row);
    if (close_text.empty()) throw IngestError("missing close value", row);
    const auto close = parse_number(close_text);
    if (!close || !std::isfinite(*close)) {
      throw IngestError("unparseable close value '" + close_text + "'", row);
    }
    if (!(*close > 0.0)) throw IngestError("non-positive close value", row);
    if (!table.timestamps.empty() && !strictly_before(table.timestamps.back(), stamp)) {
      throw IngestError("timestamps not strictly increasing ('" + table.timestamps.back() +
                            "' then '" + stamp + "')",
                        row);
    }
    table.timestamps.push_back(std::move(stamp));
    table.closes.push_back(*close);
  }
  return table;
}

std::size_t window_count(std::size_t n, const WindowSpec& spec) {
  spec.validate();
  if (n < spec.window_length) return 0;
  return (n - spec.window_length) / spec.stride + 1;
}

std::vector<Series> window_series(const PriceTable& table, const WindowSpec& spec) {
  const std::size_t count = window_count(table.closes.size(), spec);
  if (count == 0) {
    throw DataError("table '" + table.ticker + "' has " + std::to_string(table.closes.size()) +
                    " rows, shorter than one window of " + std::to_string(spec.window_length));
  }
  std::vector<Series> windows;
  windows.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * spec.stride;
    Series s;
    s.id = table.ticker + ":" + std::to_string(start);
    s.values.assign(table.closes.begin() + static_cast<std::ptrdiff_t>(start),
                    table.closes.begin() + static_cast<std::ptrdiff_t>(start + spec.window_length));
    windows.push_back(std::move(s));
  }
  return windows;
}

}  // namespace tsr
