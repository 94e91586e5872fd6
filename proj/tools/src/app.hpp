#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tsdl/data.hpp"
#include "tsdl/train.hpp"
#include "tsdl/zoo.hpp"

namespace tsdl::app {

enum class Task { forecast, classify, anomaly };

std::string_view to_string(Task task);
Task parse_task(const std::string& name);

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 2;
inline constexpr int diverged = 3;
inline constexpr int data = 4;
inline constexpr int weights = 5;
}  // namespace exit_code

struct RunConfig {
  Task task = Task::forecast;
  std::string model;
  std::string csv;
  std::string synth;
  std::uint64_t seed = 1;
  std::size_t epochs = 150;
  std::size_t batch_size = 256;
  std::size_t patience = 2;
  double delta = 0;
  double lr = 1e-3;
  std::string out = "run";
  zoo::Hyper hyper;

  // forecast
  std::size_t window = 1000;
  std::size_t horizon = 50;
  std::size_t stride = 1;
  std::size_t smooth_window = 50;
  std::size_t smooth_iterations = 5;
  std::size_t length = 20000;
  double noise = 0;

  // classify
  std::size_t classes = 5;
  std::size_t segment_length = 1000;
  std::size_t per_class = 100;

  // anomaly
  std::size_t features = 126;
  std::size_t steps = 4;
  double anomaly_rate = 0.05;

  // csv
  bool header = true;
  std::vector<std::string> columns;
};

/// Task defaults: forecast mse / patience 2 / sine, classify cross-entropy /
/// patience 3 / segments, anomaly mse / patience 3 / traffic, 64-row windows,
/// batch 4096.
RunConfig preset(Task task);

/// Sets one field by its flag name (without dashes); hyper entries use
/// "hyper.<key>". Unknown keys and malformed values raise ParameterError.
void apply(RunConfig& config, const std::string& key, const std::string& value);

/// Flat `key = value` lines; blank lines and '#' comments are skipped.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

/// Every field as (key, value) in a form `apply` accepts.
std::vector<std::pair<std::string, std::string>> echo(const RunConfig& config);

void validate(const RunConfig& config);

struct TaskData {
  data::SeriesDataset train;
  data::SeriesDataset val;
  data::SeriesDataset test;
  std::vector<real> test_labels;  // anomaly windows only
  Shape input_shape;
  zoo::TopModule top;
  std::string note;
};

/// Loads or synthesizes the series and runs the task preprocessing.
TaskData prepare(const RunConfig& config);

Model build(const RunConfig& config, const TaskData& data);
train::TrainConfig training_config(const RunConfig& config);

struct Metric {
  std::string name;
  real value = 0;
};

/// forecast: mae, baseline_mae, mae_ratio. classify: accuracy.
/// anomaly: auc, k, top_k_hits.
std::vector<Metric> test_metrics(const RunConfig& config, Model& model, const TaskData& data);

void write_metrics(std::ostream& out, const std::vector<Metric>& metrics);

/// Runs a subcommand; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tsdl::app
