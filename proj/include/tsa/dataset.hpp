#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tsa {

/// Row-major so a sample is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Samples x features with +1/-1 labels.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> feature_names;

  std::size_t samples() const { return labels.size(); }
  std::size_t feature_count() const { return feature_names.size(); }

  /// Throws DataError when any invariant is broken: N >= 2, J >= 1,
  /// labels in {+1,-1}, finite values, distinct names matching J.
  void validate() const;

  /// New dataset holding the given rows, in the given order.
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

struct NormalizationStats {
  std::vector<double> means;
  std::vector<double> stds;  // population standard deviation
};

struct FoldAssignment {
  int k = 0;
  std::vector<int> fold;  // fold[n] in [0, k)

  std::vector<std::size_t> members(int f) const;
  std::vector<std::size_t> complement(int f) const;
};

/// Population mean and standard deviation per column.
NormalizationStats zscore_fit(const Dataset& train);

/// (x - mean) / std per column; zero-variance columns map to 0.
Dataset zscore_apply(const Dataset& data, const NormalizationStats& stats);

/// Same mapping applied to a single raw feature vector.
Vector zscore_apply(const Vector& x, const NormalizationStats& stats);

/// Stratified k-fold assignment. Each class is shuffled with the seed and
/// dealt round-robin, continuing the deal across classes so fold sizes
/// differ by at most one overall and at most one per class.
FoldAssignment kfold_split(const std::vector<int>& labels, int k, std::uint64_t seed);

/// Unstratified variant when only a sample count is known.
FoldAssignment kfold_split(std::size_t n, int k, std::uint64_t seed);

/// Appends `count` i.i.d. standard-normal columns named noise_1..noise_count.
Dataset inject_irrelevant_features(const Dataset& data, int count, std::uint64_t seed);

struct TrainTestSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified random split; train_fraction of each class goes to train
/// (rounded), rows keep their original relative order in each part.
TrainTestSplit stratified_split(const std::vector<int>& labels, double train_fraction,
                                std::uint64_t seed);

/// CSV: header of feature names then `label`; rows of decimals and +1/-1.
Dataset read_csv(const std::filesystem::path& path);
Dataset parse_csv(const std::string& text);
void write_csv(const Dataset& data, const std::filesystem::path& path);
std::string format_csv(const Dataset& data);

/// Shortest decimal that round-trips the double.
std::string format_double(double x);

}  // namespace tsa
