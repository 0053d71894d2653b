#pragma once

// Bacterial colony chemotaxis optimizer (maximization) with an adaptive
// sensing range and a chaotic escape step that fires when the population's
// fitness variance stalls.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tsa/chaos.hpp"
#include "tsa/dataset.hpp"
#include "tsa/llm.hpp"
#include "tsa/rng.hpp"

namespace tsa::bcc {

using Point = std::vector<double>;
/// Must be pure and safe to call concurrently.
using FitnessFn = std::function<double(const Point&)>;

struct Bacterium {
  Point position;
  double fitness = 0.0;
  Point last_direction;        // unit vector of the last attempted run
  bool last_improved = false;  // whether that run raised fitness
};

struct OptimizerConfig {
  int population = 20;
  int max_generations = 200;
  double precision_start = 2.0;
  double precision_end = 1e-5;
  double precision_update = 1.25;
  chaos::SearchBox box;
  double s_min = 1.0;
  double s_max = 0.0;  // 0 means "largest distance inside the box"
  int chaos_max_steps = 200;
  double fitness_stop = 99.5;
  double variance_m = 0.99;
  double variance_n = 1.01;
  std::uint64_t seed = 1;
  bool chaotic_escape = true;  // false gives plain BCC
  unsigned threads = 1;
  bool cache = true;

  void validate() const;
  double sensing_max() const { return s_max > 0.0 ? s_max : box.diagonal(); }
};

/// Box and constants used to tune (lambda, sigma).
OptimizerConfig llm_tuning_defaults();

struct GenerationRecord {
  int generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  double variance = 0.0;
  double sensing_range = 0.0;
  double precision = 0.0;
  bool premature = false;
  bool chaos_triggered = false;
  bool chaos_improved = false;
};

struct OptimizerTrace {
  std::vector<GenerationRecord> generations;
  Point best_position;
  double best_fitness = 0.0;
  std::size_t evaluations = 0;
};

struct OptimizeResult {
  Point best_position;
  double best_fitness = 0.0;
  OptimizerTrace trace;
};

/// sum_i ((f_i - mean) / f_best)^2 with f_best the maximum; 0 when f_best == 0.
double fitness_variance(std::span<const double> fitnesses);

/// s_min + (s_max - s_min) * variance / population, clamped to [s_min, s_max].
double adaptive_sensing_range(double variance, const OptimizerConfig& config);

/// m < var_next / var_prev < n, with 0/0 counted as stalled.
bool detect_premature(double var_prev, double var_next, double m = 0.99, double n = 1.01);

/// Run length for a given precision: (precision / precision_start) * 0.1 * diagonal.
double step_length(double precision, const OptimizerConfig& config);

/// Sensing range and premature test across generations, fed with the
/// end-of-generation fitness variance.
class VarianceMonitor {
 public:
  VarianceMonitor(const OptimizerConfig& config, double initial_variance);

  /// Sensing range for the generation in progress.
  double sensing_range() const;
  /// Closes generation `generation`; true when the colony is judged premature.
  bool close_generation(int generation, double variance);

 private:
  const OptimizerConfig& config_;
  double var_prev_;
};

/// Runs a recorded sequence of colony fitness values through the monitor.
/// Entry 0 is the initial colony, entry g + 1 the colony after generation g.
std::vector<GenerationRecord> replay_fitness_trace(
    const std::vector<std::vector<double>>& colony_fitness, const OptimizerConfig& config);

Point random_unit_vector(std::size_t dims, Rng& rng);

/// One run-and-tumble move with greedy acceptance.
Bacterium chemotaxis_step(Bacterium b, double precision, const OptimizerConfig& config,
                          const FitnessFn& fitness, Rng& rng);

/// Moves each bacterium a random fraction of the way toward the fittest
/// better neighbour inside the sensing range. Decisions use the population
/// as it was on entry.
void colony_interaction(std::vector<Bacterium>& population, double sensing_range,
                        const chaos::SearchBox& box, const FitnessFn& fitness, Rng& rng);

/// Improved-Tent chaotic walk from the incumbent over the whole box; returns
/// the first strictly better candidate or the incumbent unchanged.
Bacterium chaotic_search(const Bacterium& best, const chaos::SearchBox& box, int max_steps,
                         const FitnessFn& fitness, Rng& rng);

OptimizeResult optimize(const FitnessFn& fitness, const OptimizerConfig& config);

/// Uniform sampling baseline with population * max_generations evaluations.
OptimizeResult random_search(const FitnessFn& fitness, const OptimizerConfig& config);

/// generation,best_fitness,mean_fitness,variance,sensing_range,precision,chaos_triggered
std::string trace_to_csv(const OptimizerTrace& trace);

// ---------------------------------------------------------------------------
// Cross-validated accuracy of the local learning machine.

/// Percent of samples predicted correctly when each fold is held out in turn.
/// Training parts keep their normalized values (no per-fold refit).
class CvFitness {
 public:
  CvFitness(Dataset normalized, FoldAssignment folds, llm::TrainOptions opts = {});

  double operator()(double lambda, double sigma) const;
  double operator()(const Point& u) const { return (*this)(u.at(0), u.at(1)); }

  /// Folds whose training part lacked a class (scored as all wrong).
  const std::vector<int>& degenerate_folds() const { return degenerate_; }

 private:
  struct Fold {
    Matrix train_x;
    std::vector<int> train_y;
    Matrix test_x;
    std::vector<int> test_y;
  };
  std::vector<Fold> folds_;
  std::vector<int> degenerate_;
  std::size_t total_ = 0;
  llm::TrainOptions opts_;
};

double fitness_cv(const Dataset& normalized, double lambda, double sigma,
                  const FoldAssignment& folds);

}  // namespace tsa::bcc
