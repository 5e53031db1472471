#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tsr/series.hpp"

namespace tsr {

/// Closing prices of one instrument in timestamp order.
struct PriceTable {
  std::string ticker;
  std::vector<std::string> timestamps;
  std::vector<double> closes;
};

struct CsvColumns {
  std::string date = "date";
  std::string close = "close";
  /// Ticker name for the table; empty means "use the file stem".
  std::string ticker;
};

/// Overlapping window layout; defaults match the sketch dataset (30 / 5).
struct WindowSpec {
  std::size_t window_length = 30;
  std::size_t stride = 5;

  void validate() const;
};

/// Parses a comma-separated file with a header row. Column lookup is
/// case-insensitive. Rejects blank, unparseable or non-positive closes and
/// timestamps that are not strictly increasing; errors carry the file line.
PriceTable load_csv(const std::filesystem::path& path, const CsvColumns& columns = {});

/// Number of windows produced for a table of `n` rows.
std::size_t window_count(std::size_t n, const WindowSpec& spec);

/// Windows start at 0, stride, 2*stride, ...; each carries id
/// "<ticker>:<start_offset>". Throws DataError when the table is shorter than
/// one window.
std::vector<Series> window_series(const PriceTable& table, const WindowSpec& spec);

}  // namespace tsr
