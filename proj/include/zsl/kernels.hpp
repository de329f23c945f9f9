#pragma once

// Data-parallel inner loops. Every kernel has a plain serial reference in
// zsl::kernels::serial and an OpenMP version in zsl::kernels::omp with the
// same signature. The library calls the OpenMP versions; the serial ones are
// kept for tests and the benchmark.
//
// class_sums, rank_nearest and mean_centroid_distances produce bit-identical
// results in both flavours (same per-element accumulation order). gram()
// differs only by floating-point reassociation.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "zsl/data_io.hpp"

namespace zsl::kernels {

/// Per-class row sums of a feature matrix (C x D) and per-class row counts.
struct ClassSums {
  Eigen::MatrixXd sums;
  std::vector<std::size_t> counts;
};

struct Neighbor {
  std::size_t index;
  double distance;  // Euclidean
};

namespace serial {

ClassSums class_sums(const FeatureMatrix& x, std::span<const std::size_t> label_index, std::size_t num_classes);

/// xᵀx for an N x D matrix.
Eigen::MatrixXd gram(const Eigen::MatrixXd& x);

/// For each row of `queries`, the k nearest rows of `targets` by Euclidean
/// distance, ascending; equal distances keep the lower target index first.
std::vector<std::vector<Neighbor>> rank_nearest(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& targets,
                                                std::size_t k);

/// Mean distance of each matrix's rows to their centroid.
std::vector<double> mean_centroid_distances(std::span<const FeatureMatrix* const> sets);

}  // namespace serial

namespace omp {

ClassSums class_sums(const FeatureMatrix& x, std::span<const std::size_t> label_index, std::size_t num_classes);
Eigen::MatrixXd gram(const Eigen::MatrixXd& x);
std::vector<std::vector<Neighbor>> rank_nearest(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& targets,
                                                std::size_t k);
std::vector<double> mean_centroid_distances(std::span<const FeatureMatrix* const> sets);

}  // namespace omp

/// Mean distance of the rows of one matrix to their centroid. The centroid is
/// accumulated relative to the first row, so identical rows give exactly 0.
double mean_centroid_distance(const FeatureMatrix& m);

/// Top-k ranking of one query; shared by both rank_nearest flavours.
std::vector<Neighbor> rank_one(const Eigen::Ref<const Eigen::RowVectorXd>& query, const Eigen::MatrixXd& targets,
                               std::size_t k);

}  // namespace zsl::kernels
