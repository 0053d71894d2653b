#include <string>

#include "tsa/bcc.hpp"
#include "tsa/error.hpp"

namespace tsa::bcc {

namespace {

bool has_both_classes_twice(const std::vector<int>& y) {
  std::size_t pos = 0, neg = 0;
  for (int v : y) (v > 0 ? pos : neg)++;
  return pos >= 2 && neg >= 2;
}

}  // namespace

CvFitness::CvFitness(Dataset normalized, FoldAssignment folds, llm::TrainOptions opts)
    : opts_(opts) {
  if (folds.fold.size() != normalized.samples())
    throw DataError("fold assignment does not cover the dataset");
  total_ = normalized.samples();
  for (int f = 0; f < folds.k; ++f) {
    const Dataset train = normalized.subset(folds.complement(f));
    const Dataset test = normalized.subset(folds.members(f));
    if (!has_both_classes_twice(train.labels)) degenerate_.push_back(f);
    folds_.push_back({train.features, train.labels, test.features, test.labels});
  }
}

double CvFitness::operator()(double lambda, double sigma) const {
  const llm::LlmHyperparams hyper{lambda, sigma};
  std::size_t correct = 0;
  for (std::size_t f = 0; f < folds_.size(); ++f) {
    const Fold& fold = folds_[f];
    if (!has_both_classes_twice(fold.train_y)) continue;  // whole fold counts as wrong
    const llm::FitResult fit = llm::fit_weights(fold.train_x, fold.train_y, hyper, opts_);
    for (Eigen::Index r = 0; r < fold.test_x.rows(); ++r) {
      const double m = llm::query_margin(fold.train_x, fold.train_y, fit.weights, sigma,
                                         fold.test_x.row(r).transpose());
      if (llm::margin_to_label(m) == fold.test_y[static_cast<std::size_t>(r)]) ++correct;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total_);
}

double fitness_cv(const Dataset& normalized, double lambda, double sigma,
                  const FoldAssignment& folds) {
  return CvFitness(normalized, folds)(lambda, sigma);
}

}  // namespace tsa::bcc
