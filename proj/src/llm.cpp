#include "tsa/llm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "tsa/error.hpp"

namespace tsa::llm {

namespace {

// log(1 + exp(t)) without overflow.
double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

// exp(-s) / (1 + exp(-s)), i.e. the logistic function of -s.
double logistic_neg(double s) {
  if (s > 700.0) return std::exp(-s);
  if (s < -700.0) return 1.0;
  if (s >= 0.0) {
    const double e = std::exp(-s);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(s));
}

// Kernel weights exp(-d/sigma) normalized over `group`, shifted by the
// group minimum so tiny sigma does not underflow every term to zero.
void normalized_kernel(const Vector& dist, const std::vector<std::size_t>& group, double sigma,
                       std::vector<double>& out) {
  out.resize(group.size());
  if (group.empty()) return;
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t i : group) dmin = std::min(dmin, dist[static_cast<Eigen::Index>(i)]);
  double total = 0.0;
  for (std::size_t k = 0; k < group.size(); ++k) {
    out[k] = std::exp(-(dist[static_cast<Eigen::Index>(group[k])] - dmin) / sigma);
    total += out[k];
  }
  for (double& p : out) p /= total;
}

void check_weight_dims(const Matrix& x, const Vector& w) {
  if (x.cols() != w.size())
    throw DataError("weight vector has " + std::to_string(w.size()) + " entries, data has " +
                    std::to_string(x.cols()) + " features");
}

// Absolute differences of every row of x against `center`, and their
// weighted distances.
void row_differences(const Matrix& x, const Vector& center, const Vector& w, Matrix& diff,
                     Vector& dist) {
  diff = (x.rowwise() - center.transpose()).cwiseAbs();
  dist.noalias() = diff * w;
}

}  // namespace

void LlmHyperparams::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw ConfigError("lambda must be a positive finite number");
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw ConfigError("sigma must be a positive finite number");
}

double weighted_manhattan(const Vector& x1, const Vector& x2, const Vector& w) {
  if (x1.size() != x2.size() || x1.size() != w.size())
    throw DataError("weighted_manhattan: dimension mismatch");
  return (x1 - x2).cwiseAbs().dot(w);
}

NeighborProbabilities neighbor_probabilities(std::size_t n, const Matrix& x,
                                             const std::vector<int>& labels, const Vector& w,
                                             double sigma) {
  check_weight_dims(x, w);
  NeighborProbabilities out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != labels[n])
      out.misses.push_back(i);
    else if (i != n)
      out.hits.push_back(i);
  }
  if (out.misses.empty())
    throw DataError("sample " + std::to_string(n) + " has no samples of the opposite class");
  if (out.hits.empty())
    throw DataError("class " + std::to_string(labels[n]) +
                    " needs at least two samples (sample " + std::to_string(n) +
                    " has no same-class peer)");
  Matrix diff;
  Vector dist;
  row_differences(x, x.row(static_cast<Eigen::Index>(n)).transpose(), w, diff, dist);
  normalized_kernel(dist, out.misses, sigma, out.p_miss);
  normalized_kernel(dist, out.hits, sigma, out.p_hit);
  return out;
}

MarginTerms expected_margin_terms(const Matrix& x, const std::vector<int>& labels,
                                  const Vector& w, double sigma) {
  check_weight_dims(x, w);
  const auto n_samples = x.rows();
  MarginTerms terms;
  terms.zbar.resize(n_samples, x.cols());

  std::vector<std::size_t> misses, hits;
  std::vector<double> p_miss, p_hit;
  Matrix diff;
  Vector dist, coef(n_samples);
  for (Eigen::Index n = 0; n < n_samples; ++n) {
    misses.clear();
    hits.clear();
    for (Eigen::Index i = 0; i < n_samples; ++i) {
      if (labels[static_cast<std::size_t>(i)] != labels[static_cast<std::size_t>(n)])
        misses.push_back(static_cast<std::size_t>(i));
      else if (i != n)
        hits.push_back(static_cast<std::size_t>(i));
    }
    if (misses.empty() || hits.empty())
      throw DataError("every sample needs a same-class peer and an opposite-class sample");
    row_differences(x, x.row(n).transpose(), w, diff, dist);
    normalized_kernel(dist, misses, sigma, p_miss);
    normalized_kernel(dist, hits, sigma, p_hit);
    coef.setZero();
    for (std::size_t k = 0; k < misses.size(); ++k) coef[static_cast<Eigen::Index>(misses[k])] = p_miss[k];
    for (std::size_t k = 0; k < hits.size(); ++k) coef[static_cast<Eigen::Index>(hits[k])] = -p_hit[k];
    terms.zbar.row(n).noalias() = coef.transpose() * diff;
  }
  return terms;
}

namespace {

// Expected-margin builder for one training matrix. Pair differences
// |x_a - x_b| are recomputed from x on each call: x stays in cache, while a
// stored table of all pairs would not once J grows.
class PairTable {
 public:
  explicit PairTable(const Matrix& x) : x_(x), n_(x.rows()) {}

  MarginTerms margin_terms(const std::vector<int>& labels, const Vector& w, double sigma) const {
    const Eigen::RowVectorXd w_row = w.transpose();
    Vector pair_dist(n_ * (n_ - 1) / 2);
    {
      Eigen::Index p = 0;
      for (Eigen::Index a = 0; a < n_; ++a)
        for (Eigen::Index b = a + 1; b < n_; ++b)
          pair_dist[p++] = (x_.row(a) - x_.row(b)).cwiseAbs().dot(w_row);
    }
    Matrix coef = Matrix::Zero(n_, n_);
    Vector dist(n_);
    std::vector<std::size_t> misses, hits;
    std::vector<double> p_miss, p_hit;
    for (Eigen::Index a = 0; a < n_; ++a) {
      misses.clear();
      hits.clear();
      for (Eigen::Index b = 0; b < n_; ++b) {
        dist[b] = a == b ? 0.0 : pair_dist[index(std::min(a, b), std::max(a, b))];
        if (labels[static_cast<std::size_t>(b)] != labels[static_cast<std::size_t>(a)])
          misses.push_back(static_cast<std::size_t>(b));
        else if (b != a)
          hits.push_back(static_cast<std::size_t>(b));
      }
      if (misses.empty() || hits.empty())
        throw DataError("every sample needs a same-class peer and an opposite-class sample");
      normalized_kernel(dist, misses, sigma, p_miss);
      normalized_kernel(dist, hits, sigma, p_hit);
      for (std::size_t k = 0; k < misses.size(); ++k)
        coef(a, static_cast<Eigen::Index>(misses[k])) = p_miss[k];
      for (std::size_t k = 0; k < hits.size(); ++k)
        coef(a, static_cast<Eigen::Index>(hits[k])) = -p_hit[k];
    }
    MarginTerms terms;
    terms.zbar = Matrix::Zero(n_, x_.cols());
    Eigen::RowVectorXd d(x_.cols());
    for (Eigen::Index a = 0; a < n_; ++a)
      for (Eigen::Index b = a + 1; b < n_; ++b) {
        const double cab = coef(a, b), cba = coef(b, a);
        if (cab == 0.0 && cba == 0.0) continue;
        d = (x_.row(a) - x_.row(b)).cwiseAbs();
        terms.zbar.row(a) += cab * d;
        terms.zbar.row(b) += cba * d;
      }
    return terms;
  }

 private:
  Eigen::Index index(Eigen::Index a, Eigen::Index b) const {
    return a * n_ - a * (a + 1) / 2 + (b - a - 1);
  }

  const Matrix& x_;
  Eigen::Index n_;
};

}  // namespace

double objective(const Vector& v, const MarginTerms& terms, double lambda) {
  const Vector s = terms.zbar * v.cwiseAbs2();
  double loss = 0.0;
  for (Eigen::Index n = 0; n < s.size(); ++n) loss += softplus(-s[n]);
  return loss + lambda * v.squaredNorm();
}

Vector objective_gradient(const Vector& v, const MarginTerms& terms, double lambda) {
  const Vector s = terms.zbar * v.cwiseAbs2();
  Vector q(s.size());
  for (Eigen::Index n = 0; n < s.size(); ++n) q[n] = logistic_neg(s[n]);
  const Vector bracket = Vector::Constant(v.size(), lambda) - terms.zbar.transpose() * q;
  return 2.0 * bracket.cwiseProduct(v);
}

namespace {

// Objective at w = v^2 together with the logistic factors the gradient needs,
// sharing one exponential per sample.
struct Evaluation {
  double objective = 0.0;
  Vector q;  // logistic(-s_n)
};

void evaluate_at(const Vector& v, const MarginTerms& terms, double lambda, Evaluation& out) {
  const Vector s = terms.zbar * v.cwiseAbs2();
  out.q.resize(s.size());
  double loss = 0.0;
  for (Eigen::Index n = 0; n < s.size(); ++n) {
    const double t = std::exp(-std::abs(s[n]));
    loss += std::max(-s[n], 0.0) + std::log1p(t);
    out.q[n] = s[n] >= 0.0 ? t / (1.0 + t) : 1.0 / (1.0 + t);
  }
  out.objective = loss + lambda * v.squaredNorm();
}

}  // namespace

InnerResult solve_inner(const MarginTerms& terms, double lambda, const Vector& v0,
                        const TrainOptions& opts) {
  if (v0.size() != terms.zbar.cols()) throw DataError("solve_inner: v0 has wrong dimension");
  if (!v0.allFinite()) throw NumericalError("solve_inner: non-finite starting point");
  InnerResult res;
  res.v = v0;
  Evaluation cur, trial_eval;
  evaluate_at(res.v, terms, lambda, cur);
  res.objective = cur.objective;
  res.history.push_back(res.objective);

  // The trial step starts at 1 and is halved until the Armijo condition
  // holds; the next iteration retries from twice the last accepted step
  // (capped at 1) instead of from 1.
  double eta0 = 1.0;
  Vector g, trial;
  for (res.iterations = 0; res.iterations < opts.max_inner_iters; ++res.iterations) {
    g.noalias() = terms.zbar.transpose() * cur.q;
    g = 2.0 * (lambda - g.array()).matrix().cwiseProduct(res.v);
    const double gg = g.squaredNorm();
    if (gg == 0.0) {
      res.converged = true;
      break;
    }
    double eta = eta0;
    bool accepted = false;
    for (int halvings = 0; halvings < 80; ++halvings) {
      trial = res.v - eta * g;
      evaluate_at(trial, terms, lambda, trial_eval);
      if (trial_eval.objective <= res.objective - opts.armijo * eta * gg) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) {
      res.converged = true;  // no descent possible at machine precision
      break;
    }
    const double previous = res.objective;
    const double decrease = previous - trial_eval.objective;
    std::swap(res.v, trial);
    std::swap(cur, trial_eval);
    res.objective = cur.objective;
    res.history.push_back(res.objective);
    eta0 = std::min(1.0, 2.0 * eta);
    if (decrease <= opts.inner_tol * std::max(std::abs(previous), 1e-300)) {
      ++res.iterations;
      res.converged = true;
      break;
    }
  }
  return res;
}

void check_trainable(const std::vector<int>& labels) {
  std::size_t pos = 0, neg = 0;
  for (int y : labels) (y > 0 ? pos : neg)++;
  if (pos == 0 || neg == 0) throw DataError("training data must contain both classes");
  if (pos < 2 || neg < 2) throw DataError("each class needs at least 2 training samples");
}

FitResult fit_weights(const Matrix& x, const std::vector<int>& labels,
                      const LlmHyperparams& hyper, const TrainOptions& opts) {
  hyper.validate();
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw DataError("fit_weights: label count does not match rows");
  check_trainable(labels);

  FitResult fit;
  fit.v = Vector::Ones(x.cols());
  fit.weights = fit.v.cwiseAbs2();
  const PairTable table(x);
  for (fit.outer_iterations = 1; fit.outer_iterations <= opts.max_outer_iters;
       ++fit.outer_iterations) {
    const MarginTerms terms = table.margin_terms(labels, fit.weights, hyper.sigma);
    InnerResult inner = solve_inner(terms, hyper.lambda, fit.v, opts);
    fit.v = std::move(inner.v);
    Vector w = fit.v.cwiseAbs2();
    const double change = (w - fit.weights).cwiseAbs().maxCoeff();
    fit.weights = std::move(w);
    if (change < opts.outer_tol) {
      fit.converged = true;
      break;
    }
  }
  fit.outer_iterations = std::min(fit.outer_iterations, opts.max_outer_iters);
  return fit;
}

double query_margin(const Matrix& x, const std::vector<int>& labels, const Vector& w,
                    double sigma, const Vector& query) {
  check_weight_dims(x, w);
  if (query.size() != x.cols()) throw DataError("query point has the wrong dimension");
  std::vector<std::size_t> misses, hits;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] > 0 ? hits : misses).push_back(i);
  if (misses.empty() || hits.empty()) throw DataError("reference set must contain both classes");
  Matrix diff;
  Vector dist;
  row_differences(x, query, w, diff, dist);
  std::vector<double> p_miss, p_hit;
  normalized_kernel(dist, misses, sigma, p_miss);
  normalized_kernel(dist, hits, sigma, p_hit);
  Vector coef = Vector::Zero(x.rows());
  for (std::size_t k = 0; k < misses.size(); ++k) coef[static_cast<Eigen::Index>(misses[k])] = p_miss[k];
  for (std::size_t k = 0; k < hits.size(); ++k) coef[static_cast<Eigen::Index>(hits[k])] = -p_hit[k];
  const Vector zbar = diff.transpose() * coef;
  return w.dot(zbar);
}

LlmModel::LlmModel(Vector weights, LlmHyperparams hyper, Dataset snapshot,
                   NormalizationStats stats)
    : weights_(std::move(weights)),
      hyper_(hyper),
      snapshot_(std::move(snapshot)),
      stats_(std::move(stats)) {
  if (static_cast<std::size_t>(weights_.size()) != snapshot_.feature_count())
    throw DataError("model weights do not match the snapshot feature count");
}

double LlmModel::margin(const Vector& x_raw) const {
  if (static_cast<std::size_t>(x_raw.size()) != feature_count())
    throw DataError("query has " + std::to_string(x_raw.size()) + " features, model expects " +
                    std::to_string(feature_count()));
  return query_margin(snapshot_.features, snapshot_.labels, weights_, hyper_.sigma,
                      zscore_apply(x_raw, stats_));
}

LlmModel train(const Dataset& data, const LlmHyperparams& hyper, const TrainOptions& opts) {
  data.validate();
  if (data.samples() < 4) throw DataError("training needs at least 4 samples");
  check_trainable(data.labels);
  NormalizationStats stats = zscore_fit(data);
  Dataset normalized = zscore_apply(data, stats);
  FitResult fit = fit_weights(normalized.features, normalized.labels, hyper, opts);
  return LlmModel(std::move(fit.weights), hyper, std::move(normalized), std::move(stats));
}

std::vector<NamedWeight> feature_weights(const LlmModel& model) {
  std::vector<NamedWeight> out;
  const auto& names = model.snapshot().feature_names;
  for (std::size_t j = 0; j < names.size(); ++j)
    out.push_back({names[j], model.weights()[static_cast<Eigen::Index>(j)]});
  std::stable_sort(out.begin(), out.end(),
                   [](const NamedWeight& a, const NamedWeight& b) { return a.weight > b.weight; });
  return out;
}

using nlohmann::json;

std::string model_to_json(const LlmModel& model) {
  json j;
  j["format"] = "tsa-llm-model";
  j["version"] = 1;
  j["lambda"] = model.hyper().lambda;
  j["sigma"] = model.hyper().sigma;
  j["feature_names"] = model.snapshot().feature_names;
  j["weights"] = std::vector<double>(model.weights().data(),
                                     model.weights().data() + model.weights().size());
  j["normalization"] = {{"means", model.stats().means}, {"stds", model.stats().stds}};
  json rows = json::array();
  const Matrix& x = model.snapshot().features;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    std::vector<double> row(x.row(r).data(), x.row(r).data() + x.cols());
    rows.push_back(std::move(row));
  }
  j["training"] = {{"labels", model.snapshot().labels}, {"features", std::move(rows)}};
  return j.dump(1) + "\n";
}

LlmModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
    if (j.at("format").get<std::string>() != "tsa-llm-model")
      throw DataError("not a tsa-llm-model document");
    LlmHyperparams hyper{j.at("lambda").get<double>(), j.at("sigma").get<double>()};
    hyper.validate();
    Dataset snap;
    snap.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    snap.labels = j.at("training").at("labels").get<std::vector<int>>();
    const auto rows = j.at("training").at("features").get<std::vector<std::vector<double>>>();
    const auto jdim = static_cast<Eigen::Index>(snap.feature_names.size());
    snap.features.resize(static_cast<Eigen::Index>(rows.size()), jdim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != jdim)
        throw DataError("training row " + std::to_string(r) + " has the wrong width");
      for (Eigen::Index c = 0; c < jdim; ++c)
        snap.features(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    }
    snap.validate();
    const auto w = j.at("weights").get<std::vector<double>>();
    NormalizationStats stats{j.at("normalization").at("means").get<std::vector<double>>(),
                             j.at("normalization").at("stds").get<std::vector<double>>()};
    if (stats.means.size() != snap.feature_names.size() ||
        stats.stds.size() != snap.feature_names.size())
      throw DataError("normalization stats do not match the feature count");
    Vector weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    if ((weights.array() < 0.0).any()) throw DataError("model has negative feature weights");
    return LlmModel(std::move(weights), hyper, std::move(snap), std::move(stats));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const LlmModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model '" + path.string() + "'");
  out << model_to_json(model);
}

LlmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read model '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace tsa::llm
