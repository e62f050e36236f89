#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "efhc/engine.hpp"

namespace efhc {

enum class TaskKind { quadratic, synthetic_classification, idx };

// One experiment: every (policy, seed) pair becomes a run.
struct ExperimentConfig {
  TaskKind task = TaskKind::quadratic;
  int m = 10;

  // quadratic
  int n = 10;
  int rows_per_device = 20;
  double heterogeneity = 1.0;
  double curvature = 2.0;
  double condition_cap = 100.0;

  // classification
  int classes = 10;
  int features = 20;
  int samples = 2000;
  double spread = 0.15;
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  int train_limit = 0;
  int test_limit = 0;
  int labels_per_device = 1;
  double hinge_lambda = 1e-3;

  int batch_size = 0;

  std::vector<PolicyKind> policies{PolicyKind::efhc};
  double r = 50.0;
  double rg_prob = 0.0;

  double connectivity = 0.4;
  RggReading rgg_reading = RggReading::radius;
  ScheduleMode schedule = ScheduleMode::static_graph;
  int B1 = 1;
  double subset_p = 0.5;

  StepPolicy::Kind step = StepPolicy::Kind::diminishing;
  double alpha = 0.1;
  double step_gamma = 1.0;
  double theta = 0.5;
  ThresholdDecay::Kind threshold_decay = ThresholdDecay::Kind::follow_step;
  double threshold_gamma = 1.0;

  long long K = 1000;
  std::vector<std::uint64_t> seeds{1};

  double b_M = 5000.0;
  double sigma_N = 0.9;

  bool inclusive_trigger = true;
  bool enforce_B2 = false;
  int B2 = 1;
  bool count_connection_exchanges = true;
  bool per_device_init = false;
  double init_scale = 1.0;
  int eval_every = 1;
  bool parallel_runs = false;
  std::string out_dir = "runs";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Environment variable naming the root for relative dataset paths.
inline constexpr const char* kDataRootEnv = "EFHC_DATA_ROOT";

// Flat "key = value" lines, '#' starts a comment. Unknown or repeated keys
// are FormatErrors carrying line numbers; range checks throw InvalidArgument.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

// Throws InvalidArgument naming the offending field.
void validate(const ExperimentConfig& config);

// Every key with its current value; parse_config reads it back unchanged.
void write_config(std::ostream& out, const ExperimentConfig& config);

// Commented key reference with the defaults filled in for a named template.
std::vector<std::string> template_names();
std::string config_template(const std::string& name);

// Dataset path as given if absolute, otherwise under $EFHC_DATA_ROOT when set.
std::string resolve_data_path(const std::string& path);

std::string task_name(TaskKind kind);
std::string schedule_name(ScheduleMode mode);

}  // namespace efhc
