#include "tsr/phrase_bank.hpp"

#include <fstream>
#include <random>

#include "tsr/error.hpp"
#include "tsr/random.hpp"

namespace tsr {

namespace fs = std::filesystem;

PhraseBank PhraseBank::builtin() {
  PhraseBank bank;
  auto add_all = [&bank](Feature f, int regime, std::initializer_list<const char*> phrases) {
    for (const char* p : phrases) bank.add(f, regime, p);
  };
  add_all(Feature::trend, static_cast<int>(TrendRegime::flat),
          {"neutral", "horizontal", "non-increasing", "flat", "stable", "unchanged"});
  add_all(Feature::trend, static_cast<int>(TrendRegime::up),
          {"upward", "growing", "positive", "increasing", "rising", "climbing", "advancing"});
  add_all(Feature::trend, static_cast<int>(TrendRegime::down),
          {"declining", "falling", "sliding", "sinking", "plummeting", "downward"});
  add_all(Feature::volatility, static_cast<int>(VolRegime::high),
          {"has strong variability", "has significant variations", "has aggressive variations",
           "is unstable", "has high fluctuation", "is noisy", "is variable"});
  add_all(Feature::volatility, static_cast<int>(VolRegime::low),
          {"has small volatility", "the stock shows a slight variability",
           "the stock has negligible volatility", "has low volatility", "the price remains stable"});
  add_all(Feature::volatility, static_cast<int>(VolRegime::medium), {"has moderate volatility"});
  add_all(Feature::shock, static_cast<int>(ShockRegime::shocked), {"experiences sudden shocks"});
  add_all(Feature::shock, static_cast<int>(ShockRegime::unshocked), {"has no shocks"});
  add_all(Feature::liquidity, static_cast<int>(LiquidityRegime::low), {"low liquidity"});
  add_all(Feature::liquidity, static_cast<int>(LiquidityRegime::high), {"high liquidity"});
  return bank;
}

PhraseBank PhraseBank::load_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("phrase directory not found: " + dir.string());
  PhraseBank bank;
  for (Feature f : kCaptionFeatureOrder) {
    for (std::size_t r = 0; r < regime_count(f); ++r) {
      const int regime = static_cast<int>(r);
      const fs::path file =
          dir / (std::string(feature_name(f)) + "_" + std::string(regime_name(f, regime)) + ".txt");
      if (!fs::exists(file)) continue;
      std::ifstream in(file);
      if (!in) throw IoError("cannot read " + file.string());
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto last = line.find_last_not_of(" \t");
        bank.add(f, regime, line.substr(first, last - first + 1));
      }
    }
  }
  if (bank.entries_.empty()) throw ConfigError("no phrase files in " + dir.string());
  return bank;
}

void PhraseBank::save_dir(const fs::path& dir) const {
  fs::create_directories(dir);
  for (const auto& [key, list] : entries_) {
    const fs::path file = dir / (std::string(feature_name(key.first)) + "_" +
                                 std::string(regime_name(key.first, key.second)) + ".txt");
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    for (const auto& p : list) out << p << '\n';
  }
}

void PhraseBank::add(Feature f, int regime, std::string phrase) {
  regime_name(f, regime);  // range check
  if (phrase.empty()) throw ConfigError("empty phrase");
  entries_[{f, regime}].push_back(std::move(phrase));
}

const std::vector<std::string>& PhraseBank::phrases(Feature f, int regime) const {
  auto it = entries_.find({f, regime});
  if (it == entries_.end() || it->second.empty()) {
    throw ConfigError("phrase bank has no entry for " + std::string(feature_name(f)) + "_" +
                      std::string(regime_name(f, regime)));
  }
  return it->second;
}

bool PhraseBank::has(Feature f, int regime) const {
  auto it = entries_.find({f, regime});
  return it != entries_.end() && !it->second.empty();
}

std::size_t PhraseBank::total_phrases() const {
  std::size_t n = 0;
  for (const auto& [key, list] : entries_) n += list.size();
  return n;
}

void PhraseBank::require_complete() const {
  for (Feature f : kCaptionFeatureOrder) {
    for (std::size_t r = 0; r < regime_count(f); ++r) phrases(f, static_cast<int>(r));
  }
}

std::pair<PhraseBank, PhraseBank> PhraseBank::split_holdout(std::size_t stride) const {
  if (stride < 2) throw ParameterError("holdout stride must be >= 2");
  PhraseBank in_sample;
  PhraseBank held_out;
  for (const auto& [key, list] : entries_) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      const bool hold = list.size() >= 2 && (i + 1) % stride == 0;
      (hold ? held_out : in_sample).entries_[key].push_back(list[i]);
    }
  }
  return {std::move(in_sample), std::move(held_out)};
}

std::string generate_caption(const RegimeLabels& labels, const PhraseBank& bank,
                             std::uint64_t seed) {
  Rng rng(seed);
  std::string caption;
  for (Feature f : kCaptionFeatureOrder) {
    const auto& list = bank.phrases(f, regime_of(labels, f));
    std::uniform_int_distribution<std::size_t> pick(0, list.size() - 1);
    if (!caption.empty()) caption += ", ";
    caption += list[pick(rng)];
  }
  return caption;
}

}  // namespace tsr
