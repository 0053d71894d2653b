#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsa/cli.hpp"
#include "tsa/error.hpp"
#include "tsa/rng.hpp"

using namespace tsa;
using namespace tsa::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tsa_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int tsa_run(std::vector<std::string> args, std::string* output = nullptr) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  if (output) *output = out.str() + err.str();
  return code;
}

Dataset blobs(int n, int noise_cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Dataset d;
  d.features.resize(n, 2 + noise_cols);
  for (int i = 0; i < n; ++i) {
    const int y = i % 3 == 0 ? -1 : 1;
    d.labels.push_back(y);
    d.features(i, 0) = 1.5 * y + 0.6 * g(rng);
    d.features(i, 1) = -1.0 * y + 0.8 * g(rng);
    for (int j = 0; j < noise_cols; ++j) d.features(i, 2 + j) = g(rng);
  }
  for (int j = 0; j < 2 + noise_cols; ++j) d.feature_names.push_back("f" + std::to_string(j));
  return d;
}

TuneSettings quick_settings() {
  TuneSettings s;
  s.optimizer_config.population = 4;
  s.optimizer_config.max_generations = 3;
  s.optimizer_config.chaos_max_steps = 10;
  return s;
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(tsa_run({}) == 2);
  CHECK(tsa_run({"no-such-command"}) == 2);
  CHECK(tsa_run({"--help"}) == 0);
  const auto dir = scratch("codes");
  CHECK(tsa_run({"--out-dir", dir.string(), "chaos-demo", "--steps", "0"}) == 2);
  CHECK(tsa_run({"--out-dir", dir.string(), "chaos-demo", "--x0", "1.5"}) == 2);
  CHECK(tsa_run({"--out-dir", dir.string(), "tune", "--data", (dir / "missing.csv").string()}) == 3);
  CHECK(tsa_run({"--out-dir", dir.string(), "tune", "--data", "x.csv", "--optimizer", "anneal"}) == 2);
  CHECK(tsa_run({"--out-dir", dir.string(), "--config", (dir / "nope.json").string(), "chaos-demo"}) == 2);
  CHECK(tsa_run({"--out-dir", dir.string(), "eval"}) == 2);
}

TEST_CASE("chaos-demo writes both orbits and a manifest") {
  const auto dir = scratch("demo");
  std::string text;
  REQUIRE(tsa_run({"--out-dir", dir.string(), "chaos-demo", "--steps", "60"}, &text) == 0);
  const std::string standard = slurp(dir / "tent_standard.csv");
  CHECK(std::count(standard.begin(), standard.end(), '\n') == 62);  // header + 61 points
  // The plain orbit ends in the absorbing zero.
  CHECK(standard.substr(standard.rfind('\n', standard.size() - 2) + 1) == "60,0,0\n");
  CHECK(fs::exists(dir / "tent_improved.csv"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "chaos-demo_manifest.json"));
  CHECK(manifest.at("command") == "chaos-demo");
  CHECK(manifest.at("seed") == 1);
  CHECK(manifest.at("outputs").size() == 2);
  CHECK(fs::exists(dir / "chaos-demo_timings.json"));
}

TEST_CASE("config file values apply unless a flag overrides them") {
  const auto dir = scratch("config");
  const auto cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"seed": 7, "steps": 5, "x0": [0.3]})";
  REQUIRE(tsa_run({"--out-dir", dir.string(), "--config", cfg.string(), "chaos-demo"}) == 0);
  auto manifest = nlohmann::json::parse(slurp(dir / "chaos-demo_manifest.json"));
  CHECK(manifest.at("seed") == 7);
  CHECK(manifest.at("config").at("steps") == 5);
  REQUIRE(tsa_run({"--out-dir", dir.string(), "--config", cfg.string(), "--seed", "9", "chaos-demo",
                   "--steps", "8"}) == 0);
  manifest = nlohmann::json::parse(slurp(dir / "chaos-demo_manifest.json"));
  CHECK(manifest.at("seed") == 9);
  CHECK(manifest.at("config").at("steps") == 8);
}

TEST_CASE("simulate is byte-identical across reruns and thread counts") {
  const auto dir = scratch("sim");
  const auto scen = dir / "grid.json";
  std::ofstream(scen) << R"({"load_levels": [1.0], "dispatches_per_level": 2,
    "fault_buses": [5, 7], "t_clear": 0.1, "horizon": 1.0, "dt": 0.005, "seed": 3})";
  const auto a = dir / "a", b = dir / "b";
  REQUIRE(tsa_run({"--out-dir", a.string(), "simulate", "--scenarios", scen.string()}) == 0);
  REQUIRE(tsa_run({"--out-dir", b.string(), "--threads", "2", "simulate", "--scenarios",
                   scen.string()}) == 0);
  CHECK(slurp(a / "dataset.csv") == slurp(b / "dataset.csv"));
  CHECK(slurp(a / "skipped.json") == slurp(b / "skipped.json"));
  CHECK(slurp(a / "simulate_manifest.json") == slurp(b / "simulate_manifest.json"));
  const Dataset d = read_csv(a / "dataset.csv");
  CHECK(d.samples() == 4);
  CHECK(d.feature_count() == 33);
}

TEST_CASE("tune, eval and weights round trip") {
  const auto dir = scratch("tune");
  write_csv(blobs(40, 2, 4), dir / "data.csv");
  const std::vector<std::string> tune_args = {"tune", "--data", (dir / "data.csv").string(),
                                              "--population", "4", "--generations", "3"};
  auto with_out = [&](const fs::path& out, std::vector<std::string> rest) {
    rest.insert(rest.begin(), {"--out-dir", out.string()});
    return rest;
  };
  REQUIRE(tsa_run(with_out(dir / "r1", tune_args)) == 0);
  REQUIRE(tsa_run(with_out(dir / "r2", tune_args)) == 0);
  for (const char* f : {"report.json", "trace.csv", "model.json", "weights.csv", "tune_manifest.json"})
    CHECK(slurp(dir / "r1" / f) == slurp(dir / "r2" / f));

  const auto report = nlohmann::json::parse(slurp(dir / "r1" / "report.json"));
  const auto& cm = report.at("confusion");
  CHECK(cm.at("true_pos").get<int>() + cm.at("false_neg").get<int>() + cm.at("false_pos").get<int>() +
            cm.at("true_neg").get<int>() ==
        10);

  REQUIRE(tsa_run(with_out(dir / "e", {"eval", "--model", (dir / "r1" / "model.json").string(),
                                       "--data", (dir / "data.csv").string()})) == 0);
  const auto ev = nlohmann::json::parse(slurp(dir / "e" / "eval.json"));
  CHECK(ev.at("total") == 40);

  REQUIRE(tsa_run(with_out(dir / "w", {"weights", "--model", (dir / "r1" / "model.json").string()})) == 0);
  const std::string w = slurp(dir / "w" / "weights.csv");
  CHECK(std::count(w.begin(), w.end(), '\n') == 5);
  CHECK(w == slurp(dir / "r1" / "weights.csv"));

  // A dataset with other columns is rejected.
  write_csv(blobs(10, 3, 1), dir / "other.csv");
  CHECK(tsa_run(with_out(dir / "e2", {"eval", "--model", (dir / "r1" / "model.json").string(),
                                      "--data", (dir / "other.csv").string()})) == 3);
}

TEST_CASE("evaluate counts every sample once") {
  const Dataset d = blobs(30, 1, 2);
  const auto model = llm::train(d, {1.0, 1.0});
  const Confusion c = evaluate(model, d);
  CHECK(c.total() == 30);
  CHECK(c.accuracy() >= 0.0);
  CHECK(c.accuracy() <= 100.0);
  for (const auto& w : llm::feature_weights(model)) CHECK(w.weight >= 0.0);
  CHECK(llm::feature_weights(model).size() == 3);
  Dataset empty;
  empty.feature_names = d.feature_names;
  empty.features.resize(0, 3);
  CHECK_THROWS_AS(evaluate(model, empty), DataError);
  CHECK_THROWS(Confusion{}.accuracy());
}

TEST_CASE("tune keeps the split and reports consistent accuracies") {
  const Dataset d = blobs(48, 2, 6);
  const TuneOutcome t = tune(d, quick_settings());
  CHECK(t.split.train.size() == 36);
  CHECK(t.split.test.size() == 12);
  CHECK(t.confusion.total() == 12);
  CHECK(t.test_accuracy == doctest::Approx(t.confusion.accuracy()));
  CHECK(t.lambda >= 1e-6);
  CHECK(t.sigma <= 1000.0);
  CHECK(!t.trace.generations.empty());
  CHECK(t.cv_accuracy == t.trace.best_fitness);

  TuneSettings bad = quick_settings();
  bad.optimizer = "anneal";
  CHECK_THROWS_AS(tune(d, bad), ConfigError);
}

TEST_CASE("robustness without noise equals plain tuning") {
  const Dataset d = blobs(48, 1, 8);
  const TuneSettings s = quick_settings();
  const TuneOutcome t = tune(d, s);
  const auto rows = robustness(d, {0, 3}, s);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].count == 0);
  CHECK(rows[0].lambda == t.lambda);
  CHECK(rows[0].sigma == t.sigma);
  CHECK(rows[0].test_accuracy == t.test_accuracy);
  CHECK(rows[0].median_noise_weight == 0.0);
  CHECK(rows[1].count == 3);
  const std::string csv = robustness_csv(rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("helpers") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(median({}) == 0.0);
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(sub_seed(1, 1) != sub_seed(1, 2));
  CHECK(sub_seed(1, 1) == splitmix64(1 ^ splitmix64(1)));
}
