#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsa/bcc.hpp"
#include "tsa/dataset.hpp"
#include "tsa/llm.hpp"

namespace tsa::cli {

inline constexpr const char* kVersion = "1.0.0";

struct Confusion {
  std::size_t true_pos = 0;   // actual +1, predicted +1
  std::size_t false_neg = 0;  // actual +1, predicted -1
  std::size_t false_pos = 0;  // actual -1, predicted +1
  std::size_t true_neg = 0;

  std::size_t total() const { return true_pos + false_neg + false_pos + true_neg; }
  double accuracy() const;
};

/// Throws DataError on an empty dataset or mismatched feature names.
Confusion evaluate(const llm::LlmModel& model, const Dataset& data);

struct TuneSettings {
  std::string optimizer = "ibcc";  // ibcc | bcc | random
  double train_fraction = 0.75;
  int folds = 5;
  std::uint64_t seed = 1;
  bcc::OptimizerConfig optimizer_config = bcc::llm_tuning_defaults();
  llm::TrainOptions train_options;

  void validate() const;
};

struct TuneOutcome {
  TrainTestSplit split;
  double lambda = 0.0;
  double sigma = 0.0;
  double cv_accuracy = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  Confusion confusion;
  llm::LlmModel model;
  bcc::OptimizerTrace trace;
  std::vector<int> degenerate_folds;
};

/// Stratified split, z-score on the training part, one stratified k-fold
/// assignment, optimizer over (lambda, sigma), final model on the whole
/// training part, evaluation on the held-out part.
TuneOutcome tune(const Dataset& data, const TuneSettings& settings);

/// Independent stream seeds derived from the global one.
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t tag);

struct RobustnessRow {
  int count = 0;
  double lambda = 0.0;
  double sigma = 0.0;
  double cv_accuracy = 0.0;
  double test_accuracy = 0.0;
  double median_true_weight = 0.0;
  double median_noise_weight = 0.0;  // 0 when count is 0
};

std::vector<RobustnessRow> robustness(const Dataset& data, const std::vector<int>& counts,
                                      const TuneSettings& settings);

double median(std::vector<double> v);

// Serialization (report.cpp).
nlohmann::json confusion_json(const Confusion& c);
nlohmann::json tune_report_json(const TuneOutcome& out, const TuneSettings& settings);
std::string robustness_csv(const std::vector<RobustnessRow>& rows);
std::string weights_csv(const std::vector<llm::NamedWeight>& weights);
std::string orbit_csv(const std::vector<std::vector<double>>& orbit);
std::string confusion_table(const Confusion& c);
std::uint64_t fnv1a(const std::string& text);
nlohmann::json manifest_json(const std::string& command, const nlohmann::json& config,
                             std::uint64_t seed, const std::vector<std::string>& outputs);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Full command-line entry point. Returns the process exit code:
/// 0 success, 2 configuration error, 3 data error, 4 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace tsa::cli
