#include "tsa/bcc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <optional>

#include "tsa/error.hpp"
#include "tsa/parallel.hpp"

namespace tsa::bcc {

namespace {

// Stream tags for derive_rng.
enum : std::uint64_t { kInit = 1, kChemotaxis = 2, kColony = 3, kChaos = 4, kRandom = 5 };

double distance(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return std::sqrt(s);
}

Point uniform_point(const chaos::SearchBox& box, Rng& rng) {
  Point p(box.dims());
  for (std::size_t d = 0; d < box.dims(); ++d) {
    std::uniform_real_distribution<double> u(box.lower[d], box.upper[d]);
    p[d] = u(rng);
  }
  return p;
}

// Memoizing, optionally parallel batch evaluator. Lookups and inserts happen
// on the calling thread only.
class Evaluator {
 public:
  Evaluator(const FitnessFn& fn, unsigned threads, bool cache)
      : fn_(fn), threads_(threads), cache_enabled_(cache) {}

  std::vector<double> operator()(const std::vector<Point>& points) {
    std::vector<double> out(points.size());
    std::vector<std::string> keys(points.size());
    std::vector<std::size_t> pending;
    std::map<std::string, std::size_t> first_pending;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (cache_enabled_) {
        keys[i] = key(points[i]);
        if (auto it = cache_.find(keys[i]); it != cache_.end()) {
          out[i] = it->second;
          continue;
        }
        if (first_pending.count(keys[i])) continue;
        first_pending.emplace(keys[i], i);
      }
      pending.push_back(i);
    }
    std::vector<double> values(pending.size());
    parallel_for(pending.size(), threads_, [&](std::size_t k) {
      values[k] = fn_(points[pending[k]]);
    });
    evaluations_ += pending.size();
    for (std::size_t k = 0; k < pending.size(); ++k) {
      out[pending[k]] = values[k];
      if (cache_enabled_) cache_.emplace(keys[pending[k]], values[k]);
    }
    if (cache_enabled_)
      for (std::size_t i = 0; i < points.size(); ++i)
        if (auto it = first_pending.find(keys[i]); it != first_pending.end() && it->second != i)
          out[i] = cache_.at(keys[i]);
    return out;
  }

  double operator()(const Point& p) { return (*this)(std::vector<Point>{p}).front(); }

  std::size_t evaluations() const { return evaluations_; }
  unsigned threads() const { return threads_ == 0 ? default_threads() : threads_; }

 private:
  static std::string key(const Point& p) {
    std::string k;
    char buf[32];
    for (double x : p) {
      std::snprintf(buf, sizeof(buf), "%.12g;", x);
      k += buf;
    }
    return k;
  }

  const FitnessFn& fn_;
  unsigned threads_;
  bool cache_enabled_;
  std::map<std::string, double> cache_;
  std::size_t evaluations_ = 0;
};

struct Proposal {
  Point position;
  Point direction;
};

Proposal propose_run(const Bacterium& b, double length, const chaos::SearchBox& box, Rng& rng) {
  Proposal p;
  p.direction = (b.last_improved && b.last_direction.size() == box.dims())
                    ? b.last_direction
                    : random_unit_vector(box.dims(), rng);
  p.position = b.position;
  for (std::size_t d = 0; d < box.dims(); ++d) p.position[d] += length * p.direction[d];
  p.position = box.clamp(std::move(p.position));
  return p;
}

void settle_run(Bacterium& b, Proposal&& p, double f) {
  b.last_direction = std::move(p.direction);
  b.last_improved = f > b.fitness;
  if (f >= b.fitness) {
    b.position = std::move(p.position);
    b.fitness = f;
  }
}

// Destination per bacterium, or nullopt when nobody better is in range.
std::vector<std::optional<Point>> plan_interaction(const std::vector<Bacterium>& pop,
                                                   double sensing_range,
                                                   const chaos::SearchBox& box, Rng& rng) {
  std::vector<std::optional<Point>> moves(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    std::optional<std::size_t> target;
    for (std::size_t j = 0; j < pop.size(); ++j) {
      if (j == i || !(pop[j].fitness > pop[i].fitness)) continue;
      if (!(distance(pop[i].position, pop[j].position) < sensing_range)) continue;
      if (!target || pop[j].fitness > pop[*target].fitness) target = j;
    }
    if (!target) continue;
    const double r = uniform_open(rng);
    Point next = pop[i].position;
    for (std::size_t d = 0; d < next.size(); ++d)
      next[d] += r * (pop[*target].position[d] - next[d]);
    moves[i] = box.clamp(std::move(next));
  }
  return moves;
}

template <class BatchEval>
void interact(std::vector<Bacterium>& pop, double sensing_range, const chaos::SearchBox& box,
              BatchEval&& eval, Rng& rng) {
  auto moves = plan_interaction(pop, sensing_range, box, rng);
  std::vector<Point> points;
  std::vector<std::size_t> movers;
  for (std::size_t i = 0; i < moves.size(); ++i)
    if (moves[i]) {
      points.push_back(*moves[i]);
      movers.push_back(i);
    }
  if (points.empty()) return;
  const auto f = eval(points);
  for (std::size_t k = 0; k < movers.size(); ++k) {
    pop[movers[k]].position = std::move(points[k]);
    pop[movers[k]].fitness = f[k];
  }
}

// Candidates are generated in sequence and evaluated `chunk` at a time; the
// first strictly better one wins, so the result does not depend on chunk.
template <class BatchEval>
Bacterium chaos_walk(const Bacterium& best, const chaos::SearchBox& box, int max_steps,
                     BatchEval&& eval, std::size_t chunk, Rng& rng) {
  chaos::UnitPoint u = chaos::encode(best.position, box);
  int produced = 0;
  while (produced < max_steps) {
    std::vector<Point> batch;
    while (batch.size() < chunk && produced < max_steps) {
      for (double& x : u) x = chaos::improved_tent_step(x, rng);
      batch.push_back(chaos::decode(u, box));
      ++produced;
    }
    const auto f = eval(batch);
    for (std::size_t k = 0; k < batch.size(); ++k)
      if (f[k] > best.fitness) {
        Bacterium out = best;
        out.position = std::move(batch[k]);
        out.fitness = f[k];
        out.last_improved = false;
        return out;
      }
  }
  return best;
}

std::vector<double> fitness_of(const std::vector<Bacterium>& pop) {
  std::vector<double> f;
  f.reserve(pop.size());
  for (const auto& b : pop) f.push_back(b.fitness);
  return f;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

void OptimizerConfig::validate() const {
  box.validate();
  if (population < 1) throw ConfigError("population must be >= 1");
  if (max_generations < 1) throw ConfigError("max_generations must be >= 1");
  if (!(precision_start > precision_end && precision_end > 0.0))
    throw ConfigError("need precision_start > precision_end > 0");
  if (!(precision_update > 1.0)) throw ConfigError("precision_update must exceed 1");
  if (!(s_min < sensing_max())) throw ConfigError("need s_min < s_max");
  if (!(variance_m > 0.0 && variance_m < 1.0 && variance_n > 1.0))
    throw ConfigError("need 0 < m < 1 < n for premature detection");
  if (chaos_max_steps < 0) throw ConfigError("chaos_max_steps must be >= 0");
}

OptimizerConfig llm_tuning_defaults() {
  OptimizerConfig c;
  // lambda in (0, 500), sigma in (0, 1000); both must stay positive.
  c.box.lower = {1e-6, 1e-6};
  c.box.upper = {500.0, 1000.0};
  return c;
}

double fitness_variance(std::span<const double> f) {
  if (f.empty()) throw std::invalid_argument("fitness_variance of an empty population");
  const double best = *std::max_element(f.begin(), f.end());
  if (best == 0.0) return 0.0;
  const double avg = std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
  double s = 0.0;
  for (double fi : f) s += ((fi - avg) / best) * ((fi - avg) / best);
  return s;
}

double adaptive_sensing_range(double variance, const OptimizerConfig& config) {
  const double lo = config.s_min;
  const double hi = config.sensing_max();
  const double s = lo + (hi - lo) * variance / static_cast<double>(config.population);
  return std::clamp(s, lo, hi);
}

bool detect_premature(double var_prev, double var_next, double m, double n) {
  if (var_prev == 0.0) return var_next == 0.0;
  const double ratio = var_next / var_prev;
  return m < ratio && ratio < n;
}

double step_length(double precision, const OptimizerConfig& config) {
  return precision / config.precision_start * 0.1 * config.box.diagonal();
}

VarianceMonitor::VarianceMonitor(const OptimizerConfig& config, double initial_variance)
    : config_(config), var_prev_(initial_variance) {}

double VarianceMonitor::sensing_range() const {
  return adaptive_sensing_range(var_prev_, config_);
}

bool VarianceMonitor::close_generation(int generation, double variance) {
  const bool premature = generation >= 1 && detect_premature(var_prev_, variance,
                                                             config_.variance_m, config_.variance_n);
  var_prev_ = variance;
  return premature;
}

std::vector<GenerationRecord> replay_fitness_trace(
    const std::vector<std::vector<double>>& colony_fitness, const OptimizerConfig& config) {
  if (colony_fitness.empty()) throw ConfigError("fitness trace needs the initial colony");
  VarianceMonitor monitor(config, fitness_variance(colony_fitness.front()));
  std::vector<GenerationRecord> out;
  for (std::size_t k = 1; k < colony_fitness.size(); ++k) {
    const auto& fit = colony_fitness[k];
    GenerationRecord rec;
    rec.generation = static_cast<int>(k - 1);
    rec.sensing_range = monitor.sensing_range();
    rec.variance = fitness_variance(fit);
    rec.mean_fitness = mean_of(fit);
    rec.best_fitness = *std::max_element(fit.begin(), fit.end());
    rec.premature = monitor.close_generation(rec.generation, rec.variance);
    rec.chaos_triggered = rec.premature && config.chaotic_escape;
    out.push_back(rec);
  }
  return out;
}

Point random_unit_vector(std::size_t dims, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Point v(dims);
  double norm = 0.0;
  while (norm < 1e-12) {
    norm = 0.0;
    for (double& x : v) {
      x = normal(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
  }
  for (double& x : v) x /= norm;
  return v;
}

Bacterium chemotaxis_step(Bacterium b, double precision, const OptimizerConfig& config,
                          const FitnessFn& fitness, Rng& rng) {
  Proposal p = propose_run(b, step_length(precision, config), config.box, rng);
  const double f = fitness(p.position);
  settle_run(b, std::move(p), f);
  return b;
}

void colony_interaction(std::vector<Bacterium>& population, double sensing_range,
                        const chaos::SearchBox& box, const FitnessFn& fitness, Rng& rng) {
  interact(population, sensing_range, box,
           [&](const std::vector<Point>& pts) {
             std::vector<double> f;
             for (const auto& p : pts) f.push_back(fitness(p));
             return f;
           },
           rng);
}

Bacterium chaotic_search(const Bacterium& best, const chaos::SearchBox& box, int max_steps,
                         const FitnessFn& fitness, Rng& rng) {
  return chaos_walk(best, box, max_steps,
                    [&](const std::vector<Point>& pts) {
                      std::vector<double> f;
                      for (const auto& p : pts) f.push_back(fitness(p));
                      return f;
                    },
                    1, rng);
}

OptimizeResult optimize(const FitnessFn& fitness, const OptimizerConfig& config) {
  config.validate();
  Evaluator eval(fitness, config.threads, config.cache);
  auto batch = [&](const std::vector<Point>& pts) { return eval(pts); };
  const auto& box = config.box;
  const auto np = static_cast<std::size_t>(config.population);

  std::vector<Bacterium> pop(np);
  {
    Rng rng = derive_rng(config.seed, {kInit});
    std::vector<Point> starts;
    for (auto& b : pop) {
      b.position = uniform_point(box, rng);
      b.last_direction = random_unit_vector(box.dims(), rng);
      starts.push_back(b.position);
    }
    const auto f = eval(starts);
    for (std::size_t i = 0; i < np; ++i) pop[i].fitness = f[i];
  }

  auto fittest = [](const std::vector<Bacterium>& p) {
    return *std::max_element(p.begin(), p.end(), [](const Bacterium& a, const Bacterium& b) {
      return a.fitness < b.fitness;
    });
  };
  Bacterium best = fittest(pop);
  double precision = config.precision_start;
  VarianceMonitor monitor(config, fitness_variance(fitness_of(pop)));

  OptimizeResult result;
  auto& trace = result.trace;
  for (int g = 0; g < config.max_generations; ++g) {
    GenerationRecord rec;
    rec.generation = g;
    rec.precision = precision;

    // Individual runs; every bacterium draws from its own stream.
    const double len = step_length(precision, config);
    std::vector<Proposal> proposals(np);
    std::vector<Point> points(np);
    for (std::size_t i = 0; i < np; ++i) {
      Rng rng = derive_rng(config.seed, {kChemotaxis, static_cast<std::uint64_t>(g), i});
      proposals[i] = propose_run(pop[i], len, box, rng);
      points[i] = proposals[i].position;
    }
    const auto f = eval(points);
    for (std::size_t i = 0; i < np; ++i) settle_run(pop[i], std::move(proposals[i]), f[i]);

    // Colony interaction, sensing range driven by last generation's variance.
    rec.sensing_range = monitor.sensing_range();
    {
      Rng rng = derive_rng(config.seed, {kColony, static_cast<std::uint64_t>(g)});
      interact(pop, rec.sensing_range, box, batch, rng);
    }
    if (const Bacterium& top = fittest(pop); top.fitness > best.fitness) best = top;

    const auto fit = fitness_of(pop);
    rec.variance = fitness_variance(fit);
    rec.mean_fitness = mean_of(fit);
    rec.premature = monitor.close_generation(g, rec.variance);
    if (rec.premature && config.chaotic_escape) {
      rec.chaos_triggered = true;
      Rng rng = derive_rng(config.seed, {kChaos, static_cast<std::uint64_t>(g)});
      Bacterium found = chaos_walk(best, box, config.chaos_max_steps, batch, eval.threads(), rng);
      if (found.fitness > best.fitness) {
        rec.chaos_improved = true;
        best = found;
        // The escaped point replaces the weakest bacterium so the colony can follow it.
        auto worst = std::min_element(pop.begin(), pop.end(), [](const Bacterium& a, const Bacterium& b) {
          return a.fitness < b.fitness;
        });
        worst->position = found.position;
        worst->fitness = found.fitness;
        worst->last_improved = false;
      }
    }
    rec.best_fitness = best.fitness;
    trace.generations.push_back(rec);
    precision = std::max(precision / config.precision_update, config.precision_end);
    if (best.fitness > config.fitness_stop) break;
  }

  trace.best_position = best.position;
  trace.best_fitness = best.fitness;
  trace.evaluations = eval.evaluations();
  result.best_position = best.position;
  result.best_fitness = best.fitness;
  return result;
}

OptimizeResult random_search(const FitnessFn& fitness, const OptimizerConfig& config) {
  config.validate();
  Evaluator eval(fitness, config.threads, config.cache);
  OptimizeResult result;
  Bacterium best;
  best.fitness = -std::numeric_limits<double>::infinity();
  for (int g = 0; g < config.max_generations; ++g) {
    Rng rng = derive_rng(config.seed, {kRandom, static_cast<std::uint64_t>(g)});
    std::vector<Point> pts;
    for (int i = 0; i < config.population; ++i) pts.push_back(uniform_point(config.box, rng));
    const auto f = eval(pts);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (f[i] > best.fitness) {
        best.fitness = f[i];
        best.position = pts[i];
      }
    GenerationRecord rec;
    rec.generation = g;
    rec.best_fitness = best.fitness;
    rec.mean_fitness = mean_of(f);
    rec.variance = fitness_variance(f);
    result.trace.generations.push_back(rec);
    if (best.fitness > config.fitness_stop) break;
  }
  result.best_position = best.position;
  result.best_fitness = best.fitness;
  result.trace.best_position = best.position;
  result.trace.best_fitness = best.fitness;
  result.trace.evaluations = eval.evaluations();
  return result;
}

std::string trace_to_csv(const OptimizerTrace& trace) {
  std::string out =
      "generation,best_fitness,mean_fitness,variance,sensing_range,precision,chaos_triggered\n";
  for (const auto& r : trace.generations) {
    out += std::to_string(r.generation) + ',' + format_double(r.best_fitness) + ',' +
           format_double(r.mean_fitness) + ',' + format_double(r.variance) + ',' +
           format_double(r.sensing_range) + ',' + format_double(r.precision) + ',' +
           (r.chaos_triggered ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace tsa::bcc
