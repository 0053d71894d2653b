#pragma once

// Local-learning-machine classifier: feature weights learned by maximizing
// expected nearest-miss / nearest-hit margins under an l1 penalty.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tsa/dataset.hpp"

namespace tsa::llm {

struct LlmHyperparams {
  double lambda = 1.0;  // regularization strength
  double sigma = 1.0;   // kernel width

  void validate() const;
};

struct TrainOptions {
  double outer_tol = 1e-4;  // infinity norm on successive weight vectors
  int max_outer_iters = 30;
  int max_inner_iters = 200;
  double inner_tol = 1e-8;  // relative objective decrease
  double armijo = 1e-4;
};

/// Row n holds the expected margin vector of sample n.
struct MarginTerms {
  Matrix zbar;
};

struct NeighborProbabilities {
  std::vector<std::size_t> misses;
  std::vector<double> p_miss;
  std::vector<std::size_t> hits;
  std::vector<double> p_hit;
};

struct InnerResult {
  Vector v;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // objective after each accepted step, starting with v0
};

struct FitResult {
  Vector v;
  Vector weights;  // v squared elementwise
  int outer_iterations = 0;
  bool converged = false;
};

/// sum_j w_j |x1_j - x2_j|
double weighted_manhattan(const Vector& x1, const Vector& x2, const Vector& w);

NeighborProbabilities neighbor_probabilities(std::size_t n, const Matrix& x,
                                             const std::vector<int>& labels, const Vector& w,
                                             double sigma);

MarginTerms expected_margin_terms(const Matrix& x, const std::vector<int>& labels,
                                  const Vector& w, double sigma);

/// Logistic loss of the reparameterized problem plus lambda * ||v||^2.
double objective(const Vector& v, const MarginTerms& terms, double lambda);

/// Exact gradient of objective() with respect to v.
Vector objective_gradient(const Vector& v, const MarginTerms& terms, double lambda);

/// Gradient descent with backtracking (Armijo) line search, warm-started at v0.
InnerResult solve_inner(const MarginTerms& terms, double lambda, const Vector& v0,
                        const TrainOptions& opts = {});

/// Alternates margin estimation and weight fitting on already-normalized
/// features. Deterministic; starts from uniform weights.
FitResult fit_weights(const Matrix& x, const std::vector<int>& labels,
                      const LlmHyperparams& hyper, const TrainOptions& opts = {});

/// Expected margin of a (normalized) query point under the hypothesis that it
/// belongs to class +1. Positive means closer to the +1 class.
double query_margin(const Matrix& x, const std::vector<int>& labels, const Vector& w,
                    double sigma, const Vector& query);

/// Decision rule: +1 iff margin > 0.
inline int margin_to_label(double margin) { return margin > 0.0 ? 1 : -1; }

class LlmModel {
 public:
  LlmModel() = default;
  LlmModel(Vector weights, LlmHyperparams hyper, Dataset snapshot, NormalizationStats stats);

  const Vector& weights() const { return weights_; }
  const LlmHyperparams& hyper() const { return hyper_; }
  const Dataset& snapshot() const { return snapshot_; }
  const NormalizationStats& stats() const { return stats_; }
  std::size_t feature_count() const { return snapshot_.feature_count(); }

  double margin(const Vector& x_raw) const;
  int predict(const Vector& x_raw) const { return margin_to_label(margin(x_raw)); }

 private:
  Vector weights_;
  LlmHyperparams hyper_;
  Dataset snapshot_;  // normalized training data
  NormalizationStats stats_;
};

/// Fits z-score statistics on `data`, trains on the normalized copy.
LlmModel train(const Dataset& data, const LlmHyperparams& hyper, const TrainOptions& opts = {});

/// Throws if data is single-class or a class has fewer than 2 samples.
void check_trainable(const std::vector<int>& labels);

struct NamedWeight {
  std::string feature;
  double weight = 0.0;
};

/// Descending by weight; ties keep original feature order.
std::vector<NamedWeight> feature_weights(const LlmModel& model);

std::string model_to_json(const LlmModel& model);
LlmModel model_from_json(const std::string& text);
void save_model(const LlmModel& model, const std::filesystem::path& path);
LlmModel load_model(const std::filesystem::path& path);

}  // namespace tsa::llm
