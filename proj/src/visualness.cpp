#include "zsl/visualness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "text_format.hpp"
#include "zsl/errors.hpp"
#include "zsl/kernels.hpp"

namespace zsl {

namespace {

void check_finite(const WordImageBundle& b) {
  if (b.features.rows == 0) throw InputError("bundle '" + b.token + "' has no rows");
  if (b.features.data.size() != b.features.rows * b.features.dim) {
    throw InputError("bundle '" + b.token + "' data size does not match its shape");
  }
  for (float v : b.features.data) {
    if (!std::isfinite(v)) throw InputError("non-finite feature in bundle '" + b.token + "'");
  }
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

VisualnessTable::VisualnessTable(ScoreMap scores) : scores_(std::move(scores)) {
  std::vector<double> values;
  values.reserve(scores_.size());
  for (const auto& [token, v] : scores_) {
    if (!std::isfinite(v) || v > 0.0) throw InputError("visualness of '" + token + "' must be finite and <= 0");
    values.push_back(v);
  }
  fallback_ = median(std::move(values));
}

bool VisualnessTable::contains(std::string_view token) const {
  if (scores_.contains(token)) return true;
  return scores_.contains(detail::ascii_lower(token));
}

double VisualnessTable::score(std::string_view token) const {
  if (auto it = scores_.find(token); it != scores_.end()) return it->second;
  if (auto it = scores_.find(detail::ascii_lower(token)); it != scores_.end()) return it->second;
  return fallback_;
}

double word_visualness(const WordImageBundle& bundle) {
  check_finite(bundle);
  // + 0.0 turns a -0.0 into 0.0 for zero-spread bundles.
  return -kernels::mean_centroid_distance(bundle.features) + 0.0;
}

VisualnessTable build_visualness_table(const std::vector<WordImageBundle>& bundles) {
  std::set<std::string> seen;
  std::vector<const FeatureMatrix*> sets;
  sets.reserve(bundles.size());
  for (const auto& b : bundles) {
    if (!seen.insert(b.token).second) throw InputError("duplicate bundle token '" + b.token + "'");
    check_finite(b);
    sets.push_back(&b.features);
  }
  const auto distances = kernels::omp::mean_centroid_distances(sets);
  VisualnessTable::ScoreMap scores;
  for (std::size_t i = 0; i < bundles.size(); ++i) scores.emplace(bundles[i].token, -distances[i] + 0.0);
  return VisualnessTable(std::move(scores));
}

std::vector<HistogramBucket> visualness_histogram(const VisualnessTable& table, std::size_t buckets) {
  if (buckets == 0) throw InputError("histogram needs at least one bucket");
  if (table.size() == 0) return {};
  std::vector<double> dist;
  for (const auto& [token, v] : table.scores()) dist.push_back(-v);
  const auto [lo_it, hi_it] = std::minmax_element(dist.begin(), dist.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (hi == lo) return {{lo, hi, dist.size()}};

  const double width = (hi - lo) / static_cast<double>(buckets);
  std::vector<HistogramBucket> out(buckets);
  for (std::size_t b = 0; b < buckets; ++b) {
    out[b].lo = lo + width * static_cast<double>(b);
    out[b].hi = b + 1 == buckets ? hi : lo + width * static_cast<double>(b + 1);
    out[b].count = 0;
  }
  for (double d : dist) {
    auto b = static_cast<std::size_t>((d - lo) / width);
    ++out[std::min(b, buckets - 1)].count;
  }
  return out;
}

std::string visualness_to_json(const VisualnessTable& table) {
  nlohmann::json j;
  j["fallback"] = table.fallback();
  j["scores"] = nlohmann::json::object();
  for (const auto& [token, v] : table.scores()) j["scores"][token] = v;
  return j.dump(2) + "\n";
}

VisualnessTable visualness_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("invalid visualness JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("scores") || !j["scores"].is_object()) {
    throw InputError("visualness JSON needs a \"scores\" object");
  }
  VisualnessTable::ScoreMap scores;
  for (const auto& [token, v] : j["scores"].items()) {
    if (!v.is_number()) throw InputError("visualness of '" + token + "' is not a number");
    scores.emplace(token, v.get<double>());
  }
  return VisualnessTable(std::move(scores));
}

void save_visualness_table(const std::filesystem::path& path, const VisualnessTable& table) {
  detail::write_text_file(path, visualness_to_json(table));
}

VisualnessTable load_visualness_table(const std::filesystem::path& path) {
  return visualness_from_json(detail::read_text_file(path));
}

std::string histogram_to_csv(const std::vector<HistogramBucket>& buckets) {
  std::ostringstream out;
  out << "bucket_lo,bucket_hi,count\n";
  for (const auto& b : buckets) {
    out << detail::format_double(b.lo) << ',' << detail::format_double(b.hi) << ',' << b.count << '\n';
  }
  return out.str();
}

}  // namespace zsl
