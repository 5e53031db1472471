#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tsr/series.hpp"

namespace tsr {

/// Phrases describing each (feature, regime) pair. On disk a bank is a
/// directory of `<feature>_<regime>.txt` files, one UTF-8 phrase per line.
class PhraseBank {
 public:
  using Key = std::pair<Feature, int>;

  PhraseBank() = default;

  /// The stock 36-phrase bank.
  static PhraseBank builtin();

  /// Loads every `<feature>_<regime>.txt` found in `dir`. Blank lines and
  /// lines starting with '#' are skipped. Unknown file names are ignored.
  static PhraseBank load_dir(const std::filesystem::path& dir);
  void save_dir(const std::filesystem::path& dir) const;

  void add(Feature f, int regime, std::string phrase);
  const std::vector<std::string>& phrases(Feature f, int regime) const;
  bool has(Feature f, int regime) const;
  std::size_t total_phrases() const;
  const std::map<Key, std::vector<std::string>>& entries() const noexcept { return entries_; }

  /// Throws ConfigError unless every regime of every caption feature is
  /// covered by at least one phrase.
  void require_complete() const;

  /// Deterministic split into (in-sample, held-out) banks: within each
  /// (feature, regime) list, every `stride`-th phrase starting at index
  /// `stride - 1` is held out. Lists with fewer than two phrases stay whole
  /// in-sample.
  std::pair<PhraseBank, PhraseBank> split_holdout(std::size_t stride) const;

 private:
  std::map<Key, std::vector<std::string>> entries_;
};

/// One uniformly drawn phrase per feature, joined with ", " in the order
/// trend, volatility, shock, liquidity. Throws ConfigError on a missing entry.
std::string generate_caption(const RegimeLabels& labels, const PhraseBank& bank,
                             std::uint64_t seed);

}  // namespace tsr
