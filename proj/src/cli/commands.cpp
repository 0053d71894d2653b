#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

#include "tsa/chaos.hpp"
#include "tsa/cli.hpp"
#include "tsa/error.hpp"
#include "tsa/powersim/case.hpp"
#include "tsa/powersim/scenarios.hpp"

namespace tsa::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag));
}

Confusion evaluate(const llm::LlmModel& model, const Dataset& data) {
  if (data.samples() == 0) throw DataError("cannot evaluate an empty dataset");
  if (data.feature_names != model.snapshot().feature_names)
    throw DataError("dataset feature names do not match the model's");
  Confusion c;
  for (std::size_t r = 0; r < data.samples(); ++r) {
    const int p = model.predict(data.features.row(static_cast<Eigen::Index>(r)).transpose());
    const int y = data.labels[r];
    if (y > 0) (p > 0 ? c.true_pos : c.false_neg)++;
    else (p > 0 ? c.false_pos : c.true_neg)++;
  }
  return c;
}

void TuneSettings::validate() const {
  if (optimizer != "ibcc" && optimizer != "bcc" && optimizer != "random")
    throw ConfigError("unknown optimizer '" + optimizer + "' (expected ibcc, bcc or random)");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0, 1)");
  if (folds < 2) throw ConfigError("need at least 2 folds");
  optimizer_config.validate();
  if (optimizer_config.box.dims() != 2) throw ConfigError("tuning box must be 2-dimensional");
}

TuneOutcome tune(const Dataset& data, const TuneSettings& s) {
  s.validate();
  data.validate();
  llm::check_trainable(data.labels);
  TuneOutcome out;
  out.split = stratified_split(data.labels, s.train_fraction, sub_seed(s.seed, 1));
  if (out.split.test.empty()) throw DataError("test split is empty");
  const Dataset train = data.subset(out.split.train);
  const Dataset test = data.subset(out.split.test);
  llm::check_trainable(train.labels);

  const Dataset normalized = zscore_apply(train, zscore_fit(train));
  const FoldAssignment folds = kfold_split(normalized.labels, s.folds, sub_seed(s.seed, 2));
  const bcc::CvFitness cv(normalized, folds, s.train_options);
  out.degenerate_folds = cv.degenerate_folds();

  bcc::OptimizerConfig cfg = s.optimizer_config;
  cfg.seed = sub_seed(s.seed, 3);
  cfg.chaotic_escape = s.optimizer != "bcc";
  const bcc::FitnessFn fn = [&cv](const bcc::Point& u) { return cv(u); };
  const bcc::OptimizeResult res =
      s.optimizer == "random" ? bcc::random_search(fn, cfg) : bcc::optimize(fn, cfg);

  out.lambda = res.best_position.at(0);
  out.sigma = res.best_position.at(1);
  out.cv_accuracy = res.best_fitness;
  out.trace = res.trace;
  out.model = llm::train(train, {out.lambda, out.sigma}, s.train_options);
  out.train_accuracy = evaluate(out.model, train).accuracy();
  out.confusion = evaluate(out.model, test);
  out.test_accuracy = out.confusion.accuracy();
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<RobustnessRow> robustness(const Dataset& data, const std::vector<int>& counts,
                                      const TuneSettings& settings) {
  for (int c : counts)
    if (c < 0) throw ConfigError("irrelevant-feature counts must be >= 0");
  std::vector<RobustnessRow> rows;
  for (int count : counts) {
    const Dataset noisy = inject_irrelevant_features(data, count, sub_seed(settings.seed, 4));
    const TuneOutcome t = tune(noisy, settings);
    std::vector<double> real, noise;
    const auto& names = noisy.feature_names;
    for (std::size_t j = 0; j < names.size(); ++j) {
      const double w = t.model.weights()(static_cast<Eigen::Index>(j));
      (j >= data.feature_count() ? noise : real).push_back(w);
    }
    rows.push_back({count, t.lambda, t.sigma, t.cv_accuracy, t.test_accuracy, median(real),
                    median(noise)});
  }
  return rows;
}

namespace {

json read_json_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + p.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in '" + p.string() + "': " + e.what());
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

template <class T>
T pick(const CLI::Option* opt, const T& flag_value, const json& cfg, const char* key,
       const T& fallback) {
  if (opt && opt->count() > 0) return flag_value;
  if (cfg.contains(key)) {
    try {
      return cfg.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  }
  return fallback;
}

void apply_optimizer_json(bcc::OptimizerConfig& c, const json& j) {
  try {
    c.population = j.value("population", c.population);
    c.max_generations = j.value("max_generations", c.max_generations);
    c.precision_start = j.value("precision_start", c.precision_start);
    c.precision_end = j.value("precision_end", c.precision_end);
    c.precision_update = j.value("precision_update", c.precision_update);
    c.s_min = j.value("s_min", c.s_min);
    c.s_max = j.value("s_max", c.s_max);
    c.chaos_max_steps = j.value("chaos_max_steps", c.chaos_max_steps);
    if (j.contains("fitness_stop"))
      c.fitness_stop = j.at("fitness_stop").is_null() ? std::numeric_limits<double>::infinity()
                                                      : j.at("fitness_stop").get<double>();
    c.variance_m = j.value("variance_m", c.variance_m);
    c.variance_n = j.value("variance_n", c.variance_n);
    c.cache = j.value("cache", c.cache);
    if (j.contains("lambda_range")) {
      const auto r = j.at("lambda_range").get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError("lambda_range needs two values");
      c.box.lower[0] = r[0];
      c.box.upper[0] = r[1];
    }
    if (j.contains("sigma_range")) {
      const auto r = j.at("sigma_range").get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError("sigma_range needs two values");
      c.box.lower[1] = r[0];
      c.box.upper[1] = r[1];
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("optimizer config: ") + e.what());
  }
}

json optimizer_json(const bcc::OptimizerConfig& c) {
  return {{"population", c.population},
          {"max_generations", c.max_generations},
          {"precision_start", c.precision_start},
          {"precision_end", c.precision_end},
          {"precision_update", c.precision_update},
          {"s_min", c.s_min},
          {"s_max", c.sensing_max()},
          {"chaos_max_steps", c.chaos_max_steps},
          {"fitness_stop", std::isfinite(c.fitness_stop) ? json(c.fitness_stop) : json(nullptr)},
          {"variance_m", c.variance_m},
          {"variance_n", c.variance_n},
          {"lambda_range", {c.box.lower[0], c.box.upper[0]}},
          {"sigma_range", {c.box.lower[1], c.box.upper[1]}}};
}

void apply_train_json(llm::TrainOptions& t, const json& j) {
  try {
    t.outer_tol = j.value("outer_tol", t.outer_tol);
    t.max_outer_iters = j.value("max_outer_iters", t.max_outer_iters);
    t.max_inner_iters = j.value("max_inner_iters", t.max_inner_iters);
    t.inner_tol = j.value("inner_tol", t.inner_tol);
    t.armijo = j.value("armijo", t.armijo);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train options: ") + e.what());
  }
}

json train_json(const llm::TrainOptions& t) {
  return {{"outer_tol", t.outer_tol},
          {"max_outer_iters", t.max_outer_iters},
          {"max_inner_iters", t.max_inner_iters},
          {"inner_tol", t.inner_tol},
          {"armijo", t.armijo}};
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Context {
  std::ostream& out;
  fs::path out_dir;
  unsigned threads = 0;

  void write(const std::string& name, const std::string& text) const {
    write_text(out_dir / name, text);
  }
  void finish(const std::string& command, const json& config, std::uint64_t seed,
              std::vector<std::string> outputs, double elapsed) const {
    write(command + "_manifest.json", manifest_json(command, config, seed, outputs).dump(2) + "\n");
    write(command + "_timings.json", json{{"command", command}, {"seconds", elapsed}}.dump(2) + "\n");
    for (const auto& o : outputs) out << "wrote " << (out_dir / o).string() << "\n";
  }
};

struct TuneFlags {
  std::string data;
  std::string optimizer = "ibcc";
  double train_fraction = 0.75;
  int folds = 5;
  int population = 20;
  int generations = 200;
  CLI::Option* data_opt = nullptr;
  CLI::Option* optimizer_opt = nullptr;
  CLI::Option* fraction_opt = nullptr;
  CLI::Option* folds_opt = nullptr;
  CLI::Option* population_opt = nullptr;
  CLI::Option* generations_opt = nullptr;

  void attach(CLI::App* app) {
    data_opt = app->add_option("--data", data, "Dataset CSV");
    optimizer_opt = app->add_option("--optimizer", optimizer, "ibcc | bcc | random");
    fraction_opt = app->add_option("--train-fraction", train_fraction, "Training share");
    folds_opt = app->add_option("--folds", folds, "Cross-validation folds");
    population_opt = app->add_option("--population", population, "Colony size");
    generations_opt = app->add_option("--generations", generations, "Maximum generations");
  }

  TuneSettings settings(const json& cfg, std::uint64_t seed, unsigned threads) const {
    TuneSettings s;
    s.seed = seed;
    s.optimizer = pick(optimizer_opt, optimizer, cfg, "optimizer", s.optimizer);
    s.train_fraction = pick(fraction_opt, train_fraction, cfg, "train_fraction", s.train_fraction);
    s.folds = pick(folds_opt, folds, cfg, "folds", s.folds);
    if (cfg.contains("optimizer_config")) apply_optimizer_json(s.optimizer_config, cfg.at("optimizer_config"));
    if (cfg.contains("train_options")) apply_train_json(s.train_options, cfg.at("train_options"));
    if (population_opt->count()) s.optimizer_config.population = population;
    if (generations_opt->count()) s.optimizer_config.max_generations = generations;
    s.optimizer_config.threads = threads;
    return s;
  }

  std::string data_path(const json& cfg) const {
    const auto p = pick(data_opt, data, cfg, "data", std::string{});
    if (p.empty()) throw ConfigError("no dataset given (--data or config key 'data')");
    return p;
  }
};

json settings_json(const TuneSettings& s) {
  return {{"optimizer", s.optimizer},
          {"train_fraction", s.train_fraction},
          {"folds", s.folds},
          {"optimizer_config", optimizer_json(s.optimizer_config)},
          {"train_options", train_json(s.train_options)}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transient stability assessment with a local learning machine tuned by a "
               "chaotic bacterial colony optimizer"};
  app.name("tsa");
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out_dir = "out";
  std::string config_path;
  auto* seed_opt = app.add_option("--seed", seed, "Random seed");
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");
  auto* out_opt = app.add_option("--out-dir", out_dir, "Output directory");
  app.add_option("--config", config_path, "Experiment config JSON");

  auto* sim = app.add_subcommand("simulate", "Generate the scenario-grid dataset");
  std::string case_path, scen_path, sim_out = "dataset.csv";
  auto* case_opt = sim->add_option("--case", case_path, "Power case JSON");
  auto* scen_opt = sim->add_option("--scenarios", scen_path, "Scenario grid JSON");
  sim->add_option("--output", sim_out, "Dataset file name inside the output directory");

  auto* tune_cmd = app.add_subcommand("tune", "Tune (lambda, sigma), train and test");
  TuneFlags tune_flags;
  tune_flags.attach(tune_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model on a dataset");
  std::string eval_model, eval_data;
  auto* eval_model_opt = eval_cmd->add_option("--model", eval_model, "Model JSON");
  auto* eval_data_opt = eval_cmd->add_option("--data", eval_data, "Dataset CSV");

  auto* rob_cmd = app.add_subcommand("robustness", "Accuracy versus injected irrelevant features");
  TuneFlags rob_flags;
  rob_flags.attach(rob_cmd);
  std::vector<int> counts{0, 50, 100, 150, 200};
  auto* counts_opt = rob_cmd->add_option("--counts", counts, "Irrelevant feature counts")->delimiter(',');

  auto* w_cmd = app.add_subcommand("weights", "List feature weights of a saved model");
  std::string w_model;
  auto* w_model_opt = w_cmd->add_option("--model", w_model, "Model JSON");

  auto* demo = app.add_subcommand("chaos-demo", "Standard versus improved Tent orbits");
  std::vector<double> x0{0.5346, 0.5347};
  int steps = 5000;
  auto* x0_opt = demo->add_option("--x0", x0, "Starting point")->delimiter(',');
  auto* steps_opt = demo->add_option("--steps", steps, "Iterations");

  std::vector<std::string> store{"tsa"};
  store.insert(store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    const json cfg = config_path.empty() ? json::object() : read_json_file(config_path);
    if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
    const std::uint64_t gseed = pick(seed_opt, seed, cfg, "seed", std::uint64_t{1});
    const Context ctx{out, fs::path(pick(out_opt, out_dir, cfg, "out_dir", out_dir)),
                      threads};
    const auto t0 = Clock::now();

    if (sim->parsed()) {
      const std::string cp = pick(case_opt, case_path, cfg, "case",
                                  std::string(TSA_DATA_DIR) + "/wscc9.json");
      powersim::ScenarioConfig sc;
      if (scen_opt->count() == 0 && cfg.contains("scenarios") && cfg.at("scenarios").is_object())
        sc = powersim::parse_scenarios(cfg.at("scenarios").dump());
      else
        sc = powersim::load_scenarios(pick(scen_opt, scen_path, cfg, "scenarios",
                                           std::string(TSA_DATA_DIR) + "/wscc9_scenarios.json"));
      if (seed_opt->count() || cfg.contains("seed")) sc.seed = gseed;
      const powersim::PowerCase pc = powersim::load_case(cp);
      const auto gen = powersim::generate_dataset(pc, sc, threads);
      ctx.write(sim_out, format_csv(gen.data));
      ctx.write("skipped.json", powersim::skipped_to_json(gen.skipped));
      std::size_t pos = 0;
      for (int y : gen.data.labels) pos += y > 0;
      out << "scenarios: " << gen.data.samples() << " simulated, " << gen.skipped.size()
          << " skipped; stable " << pos << ", unstable " << gen.data.samples() - pos << "\n";
      const json conf{{"case_hash", hex(fnv1a(read_file(cp)))},
                      {"load_levels", sc.load_levels},
                      {"dispatches_per_level", sc.dispatches_per_level},
                      {"fault_buses", sc.fault_buses},
                      {"t_clear", sc.t_clear},
                      {"horizon", sc.horizon},
                      {"dt", sc.dt},
                      {"share_range", {sc.share_low, sc.share_high}}};
      ctx.finish("simulate", conf, sc.seed, {sim_out, "skipped.json"}, seconds_since(t0));
    } else if (tune_cmd->parsed()) {
      const std::string dp = tune_flags.data_path(cfg);
      const TuneSettings s = tune_flags.settings(cfg, gseed, threads);
      s.validate();
      const Dataset data = read_csv(dp);
      const TuneOutcome t = tune(data, s);
      ctx.write("report.json", tune_report_json(t, s).dump(2) + "\n");
      ctx.write("trace.csv", bcc::trace_to_csv(t.trace));
      ctx.write("model.json", llm::model_to_json(t.model));
      ctx.write("weights.csv", weights_csv(llm::feature_weights(t.model)));
      out << "optimizer " << s.optimizer << ": lambda* = " << format_double(t.lambda)
          << ", sigma* = " << format_double(t.sigma) << "\n"
          << "cv accuracy " << format_double(t.cv_accuracy) << "%, test accuracy "
          << format_double(t.test_accuracy) << "%\n"
          << confusion_table(t.confusion);
      json conf = settings_json(s);
      conf["data_hash"] = hex(fnv1a(read_file(dp)));
      ctx.finish("tune", conf, gseed, {"report.json", "trace.csv", "model.json", "weights.csv"},
                 seconds_since(t0));
    } else if (eval_cmd->parsed()) {
      const auto mp = pick(eval_model_opt, eval_model, cfg, "model", std::string{});
      const auto dp = pick(eval_data_opt, eval_data, cfg, "data", std::string{});
      if (mp.empty() || dp.empty()) throw ConfigError("eval needs --model and --data");
      const Confusion c = evaluate(llm::load_model(mp), read_csv(dp));
      ctx.write("eval.json", confusion_json(c).dump(2) + "\n");
      out << "accuracy " << format_double(c.accuracy()) << "% on " << c.total() << " samples\n"
          << confusion_table(c);
      const json conf{{"model_hash", hex(fnv1a(read_file(mp)))},
                      {"data_hash", hex(fnv1a(read_file(dp)))}};
      ctx.finish("eval", conf, gseed, {"eval.json"}, seconds_since(t0));
    } else if (rob_cmd->parsed()) {
      const std::string dp = rob_flags.data_path(cfg);
      const TuneSettings s = rob_flags.settings(cfg, gseed, threads);
      s.validate();
      const Dataset data = read_csv(dp);
      const auto cs = pick(counts_opt, counts, cfg, "counts", counts);
      const auto rows = robustness(data, cs, s);
      ctx.write("robustness.csv", robustness_csv(rows));
      out << "irrelevant  test accuracy\n";
      for (const auto& r : rows) {
        char line[64];
        std::snprintf(line, sizeof line, "%10d  %12.2f\n", r.count, r.test_accuracy);
        out << line;
      }
      json conf = settings_json(s);
      conf["counts"] = cs;
      conf["data_hash"] = hex(fnv1a(read_file(dp)));
      ctx.finish("robustness", conf, gseed, {"robustness.csv"}, seconds_since(t0));
    } else if (w_cmd->parsed()) {
      const auto mp = pick(w_model_opt, w_model, cfg, "model", std::string{});
      if (mp.empty()) throw ConfigError("weights needs --model");
      const auto ws = llm::feature_weights(llm::load_model(mp));
      ctx.write("weights.csv", weights_csv(ws));
      for (const auto& w : ws) {
        char line[128];
        std::snprintf(line, sizeof line, "%-16s %.6g\n", w.feature.c_str(), w.weight);
        out << line;
      }
      ctx.finish("weights", {{"model_hash", hex(fnv1a(read_file(mp)))}}, gseed, {"weights.csv"},
                 seconds_since(t0));
    } else if (demo->parsed()) {
      const auto start = pick(x0_opt, x0, cfg, "x0", x0);
      const int n = pick(steps_opt, steps, cfg, "steps", steps);
      if (n < 1) throw ConfigError("steps must be >= 1");
      if (start.empty()) throw ConfigError("x0 must not be empty");
      for (double v : start)
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("x0 values must lie in [0, 1]");
      Rng rng = derive_rng(gseed, {0x7e47ULL});
      ctx.write("tent_standard.csv", orbit_csv(chaos::orbit(start, n, false, rng)));
      ctx.write("tent_improved.csv", orbit_csv(chaos::orbit(start, n, true, rng)));
      ctx.finish("chaos-demo", {{"x0", start}, {"steps", n}}, gseed,
                 {"tent_standard.csv", "tent_improved.csv"}, seconds_since(t0));
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace tsa::cli
