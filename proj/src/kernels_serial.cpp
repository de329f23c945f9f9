#include <algorithm>
#include <cmath>

#include "zsl/errors.hpp"
#include "zsl/kernels.hpp"

namespace zsl::kernels {

double mean_centroid_distance(const FeatureMatrix& m) {
  if (m.rows == 0) throw InputError("cannot compute centroid distance of an empty matrix");
  const std::size_t d = m.dim;
  const auto first = m.row(0);

  std::vector<double> offset(d, 0.0);
  for (std::size_t i = 1; i < m.rows; ++i) {
    const auto r = m.row(i);
    for (std::size_t j = 0; j < d; ++j) offset[j] += double(r[j]) - double(first[j]);
  }
  const double inv_m = 1.0 / static_cast<double>(m.rows);
  for (auto& o : offset) o *= inv_m;

  // ‖r_i − mean‖ = ‖(r_i − r_0) − offset‖
  double total = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i) {
    const auto r = m.row(i);
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = (double(r[j]) - double(first[j])) - offset[j];
      sq += diff * diff;
    }
    total += std::sqrt(sq);
  }
  return total * inv_m;
}

std::vector<Neighbor> rank_one(const Eigen::Ref<const Eigen::RowVectorXd>& query, const Eigen::MatrixXd& targets,
                               std::size_t k) {
  const auto c = static_cast<std::size_t>(targets.rows());
  std::vector<Neighbor> all(c);
  for (std::size_t t = 0; t < c; ++t) {
    const double sq = (targets.row(static_cast<Eigen::Index>(t)) - query).squaredNorm();
    all[t] = {t, sq};
  }
  const std::size_t keep = std::min(k, c);
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
                    });
  all.resize(keep);
  for (auto& n : all) n.distance = std::sqrt(n.distance);
  return all;
}

namespace serial {

ClassSums class_sums(const FeatureMatrix& x, std::span<const std::size_t> label_index, std::size_t num_classes) {
  if (label_index.size() != x.rows) throw InputError("label index length does not match rows");
  ClassSums out{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(x.dim)),
                std::vector<std::size_t>(num_classes, 0)};
  for (std::size_t i = 0; i < x.rows; ++i) {
    const std::size_t c = label_index[i];
    if (c >= num_classes) throw InputError("label index out of range");
    ++out.counts[c];
    const auto r = x.row(i);
    for (std::size_t j = 0; j < x.dim; ++j) {
      out.sums(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) += r[j];
    }
  }
  return out;
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& x) {
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index a = 0; a < d; ++a) {
      const double xa = x(i, a);
      for (Eigen::Index b = 0; b < d; ++b) g(a, b) += xa * x(i, b);
    }
  }
  return g;
}

std::vector<std::vector<Neighbor>> rank_nearest(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& targets,
                                                std::size_t k) {
  if (queries.cols() != targets.cols()) throw InputError("query and target dimensions differ");
  std::vector<std::vector<Neighbor>> out(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) out[static_cast<std::size_t>(i)] = rank_one(queries.row(i), targets, k);
  return out;
}

std::vector<double> mean_centroid_distances(std::span<const FeatureMatrix* const> sets) {
  std::vector<double> out;
  out.reserve(sets.size());
  for (const auto* m : sets) out.push_back(mean_centroid_distance(*m));
  return out;
}

}  // namespace serial
}  // namespace zsl::kernels
