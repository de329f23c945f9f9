#include <algorithm>

#include "parallel.hpp"
#include "zsl/errors.hpp"
#include "zsl/kernels.hpp"

namespace zsl::kernels::omp {

ClassSums class_sums(const FeatureMatrix& x, std::span<const std::size_t> label_index, std::size_t num_classes) {
  if (label_index.size() != x.rows) throw InputError("label index length does not match rows");
  std::vector<std::vector<std::size_t>> members(num_classes);
  for (std::size_t i = 0; i < x.rows; ++i) {
    if (label_index[i] >= num_classes) throw InputError("label index out of range");
    members[label_index[i]].push_back(i);
  }

  ClassSums out{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(x.dim)),
                std::vector<std::size_t>(num_classes, 0)};
  detail::parallel_for(static_cast<std::ptrdiff_t>(num_classes), [&](std::ptrdiff_t c) {
    const auto ci = static_cast<std::size_t>(c);
    out.counts[ci] = members[ci].size();
    auto sum = out.sums.row(c);
    for (std::size_t i : members[ci]) {
      const auto r = x.row(i);
      for (std::size_t j = 0; j < x.dim; ++j) sum(static_cast<Eigen::Index>(j)) += r[j];
    }
  });
  return out;
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& x) {
  constexpr Eigen::Index kBlock = 64;
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd g(d, d);
  const Eigen::Index blocks = (d + kBlock - 1) / kBlock;
  detail::parallel_for(blocks, [&](std::ptrdiff_t b) {
    const Eigen::Index j0 = b * kBlock;
    const Eigen::Index w = std::min(kBlock, d - j0);
    // Upper block triangle only; the mirror below makes g exactly symmetric.
    g.block(0, j0, j0 + w, w).noalias() = x.leftCols(j0 + w).transpose() * x.middleCols(j0, w);
  });
  g.triangularView<Eigen::StrictlyLower>() = g.transpose();
  return g;
}

std::vector<std::vector<Neighbor>> rank_nearest(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& targets,
                                                std::size_t k) {
  if (queries.cols() != targets.cols()) throw InputError("query and target dimensions differ");
  std::vector<std::vector<Neighbor>> out(static_cast<std::size_t>(queries.rows()));
  detail::parallel_for(queries.rows(), [&](std::ptrdiff_t i) {
    out[static_cast<std::size_t>(i)] = rank_one(queries.row(i), targets, k);
  });
  return out;
}

std::vector<double> mean_centroid_distances(std::span<const FeatureMatrix* const> sets) {
  std::vector<double> out(sets.size());
  detail::parallel_for(static_cast<std::ptrdiff_t>(sets.size()), [&](std::ptrdiff_t i) {
    out[static_cast<std::size_t>(i)] = mean_centroid_distance(*sets[static_cast<std::size_t>(i)]);
  });
  return out;
}

}  // namespace zsl::kernels::omp
