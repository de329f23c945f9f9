#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "zsl/data_io.hpp"

namespace zsl {

/// Per-word visualness scores v <= 0 (higher is more visual). Tokens missing
/// from the table score the median of the stored values.
class VisualnessTable {
 public:
  using ScoreMap = std::map<std::string, double, std::less<>>;

  VisualnessTable() = default;
  explicit VisualnessTable(ScoreMap scores);

  /// Stored score (exact token, then lowercased), otherwise the fallback.
  double score(std::string_view token) const;
  bool contains(std::string_view token) const;

  double fallback() const noexcept { return fallback_; }
  const ScoreMap& scores() const noexcept { return scores_; }
  std::size_t size() const noexcept { return scores_.size(); }

 private:
  ScoreMap scores_;
  double fallback_ = 0.0;
};

/// v = −(1/M) Σ_m ‖r_m − r̄‖₂ over the rows of the bundle.
double word_visualness(const WordImageBundle& bundle);

/// Scores every bundle (in parallel); tokens must be distinct.
VisualnessTable build_visualness_table(const std::vector<WordImageBundle>& bundles);

struct HistogramBucket {
  double lo;
  double hi;
  std::size_t count;
};

/// Equal-width histogram of the mean centroid distances (−v), the quantity
/// plotted when inspecting a vocabulary. Last bucket is closed on the right.
std::vector<HistogramBucket> visualness_histogram(const VisualnessTable& table, std::size_t buckets);

std::string visualness_to_json(const VisualnessTable& table);
VisualnessTable visualness_from_json(std::string_view text);
void save_visualness_table(const std::filesystem::path& path, const VisualnessTable& table);
VisualnessTable load_visualness_table(const std::filesystem::path& path);

std::string histogram_to_csv(const std::vector<HistogramBucket>& buckets);

}  // namespace zsl
