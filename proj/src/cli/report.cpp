#include <cstdio>
#include <fstream>
#include <sstream>

#include "tsa/cli.hpp"
#include "tsa/error.hpp"

namespace tsa::cli {

using nlohmann::json;

double Confusion::accuracy() const {
  if (total() == 0) throw DataError("accuracy of an empty evaluation");
  return 100.0 * static_cast<double>(true_pos + true_neg) / static_cast<double>(total());
}

json confusion_json(const Confusion& c) {
  return {{"true_pos", c.true_pos}, {"false_neg", c.false_neg}, {"false_pos", c.false_pos},
          {"true_neg", c.true_neg}, {"total", c.total()},      {"accuracy", c.accuracy()}};
}

json tune_report_json(const TuneOutcome& out, const TuneSettings& s) {
  json weights = json::array();
  for (const auto& w : llm::feature_weights(out.model))
    weights.push_back({{"feature", w.feature}, {"weight", w.weight}});
  return {{"optimizer", s.optimizer},
          {"lambda", out.lambda},
          {"sigma", out.sigma},
          {"cv_accuracy", out.cv_accuracy},
          {"train_accuracy", out.train_accuracy},
          {"test_accuracy", out.test_accuracy},
          {"train_size", out.split.train.size()},
          {"test_size", out.split.test.size()},
          {"confusion", confusion_json(out.confusion)},
          {"generations", out.trace.generations.size()},
          {"evaluations", out.trace.evaluations},
          {"degenerate_folds", out.degenerate_folds},
          {"trace", "trace.csv"},
          {"weights", weights}};
}

std::string robustness_csv(const std::vector<RobustnessRow>& rows) {
  std::ostringstream os;
  os << "irrelevant_features,lambda,sigma,cv_accuracy,test_accuracy,median_true_weight,"
        "median_noise_weight\n";
  for (const auto& r : rows)
    os << r.count << ',' << format_double(r.lambda) << ',' << format_double(r.sigma) << ','
       << format_double(r.cv_accuracy) << ',' << format_double(r.test_accuracy) << ','
       << format_double(r.median_true_weight) << ',' << format_double(r.median_noise_weight)
       << '\n';
  return os.str();
}

std::string weights_csv(const std::vector<llm::NamedWeight>& weights) {
  std::ostringstream os;
  os << "feature,weight\n";
  for (const auto& w : weights) os << w.feature << ',' << format_double(w.weight) << '\n';
  return os.str();
}

std::string orbit_csv(const std::vector<std::vector<double>>& orbit) {
  std::ostringstream os;
  os << "step";
  const std::size_t dims = orbit.empty() ? 0 : orbit.front().size();
  for (std::size_t d = 0; d < dims; ++d) os << ",x" << d + 1;
  os << '\n';
  for (std::size_t k = 0; k < orbit.size(); ++k) {
    os << k;
    for (double x : orbit[k]) os << ',' << format_double(x);
    os << '\n';
  }
  return os.str();
}

std::string confusion_table(const Confusion& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "              pred +1   pred -1\n"
                "actual +1  %9zu %9zu\n"
                "actual -1  %9zu %9zu\n",
                c.true_pos, c.false_neg, c.false_pos, c.true_neg);
  return buf;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json manifest_json(const std::string& command, const json& config, std::uint64_t seed,
                   const std::vector<std::string>& outputs) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a(config.dump())));
  return {{"tool", "tsa"},      {"version", kVersion}, {"command", command},
          {"seed", seed},       {"config_hash", hash}, {"config", config},
          {"outputs", outputs}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  os << text;
  if (!os) throw ConfigError("failed writing '" + path.string() + "'");
}

}  // namespace tsa::cli
