#include "efhc/config.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "efhc/error.hpp"

namespace efhc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw FormatError(fmt::format("key '{}': expected {}, got '{}'", key, expected, value));
}

long long to_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  bad_value(key, v, "an integer");
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < INT_MIN || x > INT_MAX) bad_value(key, v, "a 32-bit integer");
  return static_cast<int>(x);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size() && std::isfinite(x)) return x;
  } catch (const std::exception&) {
  }
  bad_value(key, v, "a finite number");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true or false");
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }
std::string fmt_double(double x) { return fmt::format("{}", x); }

struct Key {
  std::string name;
  std::string doc;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define EFHC_INT_KEY(field, doc)                                                        \
  Key {                                                                                 \
    #field, doc, [](ExperimentConfig& c, const std::string& v) { c.field = to_int(#field, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }               \
  }
#define EFHC_DOUBLE_KEY(field, doc)                                                         \
  Key {                                                                                     \
    #field, doc, [](ExperimentConfig& c, const std::string& v) { c.field = to_double(#field, v); }, \
        [](const ExperimentConfig& c) { return fmt_double(c.field); }                       \
  }
#define EFHC_BOOL_KEY(field, doc)                                                        \
  Key {                                                                                  \
    #field, doc, [](ExperimentConfig& c, const std::string& v) { c.field = to_bool(#field, v); }, \
        [](const ExperimentConfig& c) { return fmt_bool(c.field); }                      \
  }
#define EFHC_STRING_KEY(field, doc)                                                     \
  Key {                                                                                 \
    #field, doc, [](ExperimentConfig& c, const std::string& v) { c.field = v; },        \
        [](const ExperimentConfig& c) { return c.field; }                               \
  }

template <class E>
E to_enum(const std::string& key, const std::string& v,
          const std::vector<std::pair<std::string, E>>& names) {
  for (const auto& [n, e] : names) {
    if (n == v) return e;
  }
  std::string options;
  for (const auto& [n, e] : names) options += (options.empty() ? "" : ", ") + n;
  bad_value(key, v, "one of " + options);
}

template <class E>
std::string from_enum(E e, const std::vector<std::pair<std::string, E>>& names) {
  for (const auto& [n, x] : names) {
    if (x == e) return n;
  }
  return "?";
}

const std::vector<std::pair<std::string, TaskKind>> kTasks{
    {"quadratic", TaskKind::quadratic},
    {"synthetic_classification", TaskKind::synthetic_classification},
    {"idx", TaskKind::idx}};
const std::vector<std::pair<std::string, ScheduleMode>> kSchedules{
    {"static", ScheduleMode::static_graph},
    {"cyclic", ScheduleMode::cyclic_partition},
    {"random_subset", ScheduleMode::random_subset}};
const std::vector<std::pair<std::string, RggReading>> kReadings{
    {"radius", RggReading::radius}, {"density", RggReading::density}};
const std::vector<std::pair<std::string, StepPolicy::Kind>> kSteps{
    {"diminishing", StepPolicy::Kind::diminishing}, {"constant", StepPolicy::Kind::constant}};
const std::vector<std::pair<std::string, ThresholdDecay::Kind>> kDecays{
    {"step", ThresholdDecay::Kind::follow_step}, {"constant", ThresholdDecay::Kind::constant}};
const std::vector<std::pair<std::string, bool>> kInits{{"shared", false}, {"per_device", true}};

const std::vector<Key>& keys() {
  static const std::vector<Key> table{
      Key{"task", "quadratic | synthetic_classification | idx",
          [](ExperimentConfig& c, const std::string& v) { c.task = to_enum("task", v, kTasks); },
          [](const ExperimentConfig& c) { return from_enum(c.task, kTasks); }},
      EFHC_INT_KEY(m, "number of devices"),
      EFHC_INT_KEY(n, "quadratic: model dimension"),
      EFHC_INT_KEY(rows_per_device, "quadratic: data points per device (>= n)"),
      EFHC_DOUBLE_KEY(heterogeneity, "quadratic: spread of local minimizers"),
      EFHC_DOUBLE_KEY(curvature, "quadratic: largest eigenvalue of A_i^T A_i"),
      EFHC_DOUBLE_KEY(condition_cap, "quadratic: bound on cond(A_i^T A_i), >= 1"),
      EFHC_INT_KEY(classes, "synthetic_classification: class count"),
      EFHC_INT_KEY(features, "synthetic_classification: feature dimension"),
      EFHC_INT_KEY(samples, "synthetic_classification: training samples"),
      EFHC_DOUBLE_KEY(spread, "synthetic_classification: cluster standard deviation"),
      EFHC_STRING_KEY(train_images, "idx: training images (relative paths use $EFHC_DATA_ROOT)"),
      EFHC_STRING_KEY(train_labels, "idx: training labels"),
      EFHC_STRING_KEY(test_images, "idx: test images"),
      EFHC_STRING_KEY(test_labels, "idx: test labels"),
      EFHC_INT_KEY(train_limit, "idx: keep the first N training samples (0 = all)"),
      EFHC_INT_KEY(test_limit, "idx: keep the first N test samples (0 = all)"),
      EFHC_INT_KEY(labels_per_device, "classification: labels held by each device"),
      EFHC_DOUBLE_KEY(hinge_lambda, "classification: L2 regularization"),
      EFHC_INT_KEY(batch_size, "minibatch size per device (0 = full local gradient)"),
      Key{"policy", "comma list of efhc, gt, zt, rg",
          [](ExperimentConfig& c, const std::string& v) {
            c.policies.clear();
            for (const auto& item : split_list(v)) {
              try {
                c.policies.push_back(parse_policy(item));
              } catch (const InvalidArgument&) {
                bad_value("policy", item, "efhc, gt, zt or rg");
              }
            }
          },
          [](const ExperimentConfig& c) {
            std::string out;
            for (auto p : c.policies) out += (out.empty() ? "" : ",") + policy_name(p);
            return out;
          }},
      EFHC_DOUBLE_KEY(r, "trigger scale for efhc and gt"),
      EFHC_DOUBLE_KEY(rg_prob, "rg broadcast probability (0 = 1/m)"),
      EFHC_DOUBLE_KEY(connectivity, "random geometric graph radius (or edge density)"),
      Key{"rgg_reading", "radius | density",
          [](ExperimentConfig& c, const std::string& v) {
            c.rgg_reading = to_enum("rgg_reading", v, kReadings);
          },
          [](const ExperimentConfig& c) { return from_enum(c.rgg_reading, kReadings); }},
      Key{"schedule", "static | cyclic | random_subset",
          [](ExperimentConfig& c, const std::string& v) {
            c.schedule = to_enum("schedule", v, kSchedules);
          },
          [](const ExperimentConfig& c) { return from_enum(c.schedule, kSchedules); }},
      EFHC_INT_KEY(B1, "connectivity window of the physical graph schedule"),
      EFHC_DOUBLE_KEY(subset_p, "random_subset: per-edge activation probability"),
      Key{"step", "diminishing | constant",
          [](ExperimentConfig& c, const std::string& v) { c.step = to_enum("step", v, kSteps); },
          [](const ExperimentConfig& c) { return from_enum(c.step, kSteps); }},
      EFHC_DOUBLE_KEY(alpha, "constant step, or alpha^(0) of the diminishing schedule"),
      EFHC_DOUBLE_KEY(step_gamma, "diminishing: alpha^(0) / (1 + k/step_gamma)^theta"),
      EFHC_DOUBLE_KEY(theta, "diminishing: exponent in [0.5, 1]"),
      Key{"threshold_decay", "step (gamma^(k) = alpha^(k)) | constant",
          [](ExperimentConfig& c, const std::string& v) {
            c.threshold_decay = to_enum("threshold_decay", v, kDecays);
          },
          [](const ExperimentConfig& c) { return from_enum(c.threshold_decay, kDecays); }},
      EFHC_DOUBLE_KEY(threshold_gamma, "constant threshold decay value"),
      Key{"K", "iterations per run",
          [](ExperimentConfig& c, const std::string& v) { c.K = to_integer("K", v); },
          [](const ExperimentConfig& c) { return std::to_string(c.K); }},
      Key{"seed", "comma list of seeds; one run per policy and seed",
          [](ExperimentConfig& c, const std::string& v) {
            c.seeds.clear();
            for (const auto& item : split_list(v)) {
              const long long s = to_integer("seed", item);
              if (s < 0) bad_value("seed", item, "a non-negative integer");
              c.seeds.push_back(static_cast<std::uint64_t>(s));
            }
          },
          [](const ExperimentConfig& c) {
            std::string out;
            for (auto s : c.seeds) out += (out.empty() ? "" : ",") + std::to_string(s);
            return out;
          }},
      EFHC_DOUBLE_KEY(b_M, "mean bandwidth"),
      EFHC_DOUBLE_KEY(sigma_N, "normalized bandwidth spread in [0, 1)"),
      EFHC_BOOL_KEY(inclusive_trigger, "trigger on >= (true) or > (false)"),
      EFHC_BOOL_KEY(enforce_B2, "force a broadcast after B2 - 1 silent iterations"),
      EFHC_INT_KEY(B2, "broadcast window used with enforce_B2"),
      EFHC_BOOL_KEY(count_connection_exchanges, "include new-link exchanges in the score"),
      Key{"init", "shared | per_device initial models",
          [](ExperimentConfig& c, const std::string& v) {
            c.per_device_init = to_enum("init", v, kInits);
          },
          [](const ExperimentConfig& c) { return from_enum(c.per_device_init, kInits); }},
      EFHC_DOUBLE_KEY(init_scale, "standard deviation of initial model entries"),
      EFHC_INT_KEY(eval_every, "classification: accuracy evaluation period"),
      EFHC_BOOL_KEY(parallel_runs, "run (policy, seed) pairs concurrently"),
      EFHC_STRING_KEY(out_dir, "artifact directory for `run`"),
  };
  return table;
}

#undef EFHC_INT_KEY
#undef EFHC_DOUBLE_KEY
#undef EFHC_BOOL_KEY
#undef EFHC_STRING_KEY

const Key* find_key(const std::string& name) {
  for (const auto& k : keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument(message);
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::map<std::string, std::size_t> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(fmt::format("line {}: expected key = value", line_no));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw FormatError(fmt::format("line {}: missing key", line_no));
    const Key* k = find_key(key);
    if (!k) throw FormatError(fmt::format("line {}: unknown key '{}'", line_no, key));
    if (auto it = seen.find(key); it != seen.end()) {
      throw FormatError(
          fmt::format("duplicate key '{}' on lines {} and {}", key, it->second, line_no));
    }
    seen.emplace(key, line_no);
    try {
      k->set(config, value);
    } catch (const FormatError& e) {
      throw FormatError(fmt::format("line {}: {}", line_no, e.what()));
    }
  }
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument(fmt::format("cannot open config {}", path));
  return parse_config(in);
}

void validate(const ExperimentConfig& c) {
  require(c.m >= 2, "m must be at least 2");
  require(c.batch_size >= 0, "batch_size must be >= 0");
  if (c.task == TaskKind::quadratic) {
    require(c.n >= 1, "n must be >= 1");
    require(c.rows_per_device >= c.n, "rows_per_device must be >= n");
    require(c.heterogeneity >= 0.0, "heterogeneity must be >= 0");
    require(c.curvature > 0.0, "curvature must be positive");
    require(c.condition_cap >= 1.0, "condition_cap must be >= 1");
    require(c.batch_size <= c.rows_per_device, "batch_size must not exceed rows_per_device");
  } else {
    require(c.labels_per_device >= 1, "labels_per_device must be >= 1");
    require(c.hinge_lambda >= 0.0, "hinge_lambda must be >= 0");
    require(c.eval_every >= 1, "eval_every must be >= 1");
  }
  if (c.task == TaskKind::synthetic_classification) {
    require(c.classes >= 2, "classes must be >= 2");
    require(c.features >= 1, "features must be >= 1");
    require(c.samples >= c.m, "samples must be >= m");
    require(c.spread >= 0.0, "spread must be >= 0");
    require(c.m * c.labels_per_device >= c.classes,
            "labels_per_device too small: m * labels_per_device must cover every class");
  }
  if (c.task == TaskKind::idx) {
    require(!c.train_images.empty(), "train_images is required for task = idx");
    require(!c.train_labels.empty(), "train_labels is required for task = idx");
    require(c.test_images.empty() == c.test_labels.empty(),
            "test_images and test_labels must be given together");
    require(c.train_limit >= 0 && c.test_limit >= 0, "train_limit and test_limit must be >= 0");
  }
  require(!c.policies.empty(), "policy must list at least one policy");
  require(c.r > 0.0, "r must be positive");
  require(c.rg_prob >= 0.0 && c.rg_prob <= 1.0, "rg_prob must lie in [0, 1]");
  require(c.connectivity > 0.0, "connectivity must be positive");
  if (c.rgg_reading == RggReading::density) {
    require(c.connectivity <= 1.0, "connectivity must lie in (0, 1] as a density");
  }
  require(c.B1 >= 1, "B1 must be >= 1");
  require(c.subset_p >= 0.0 && c.subset_p <= 1.0, "subset_p must lie in [0, 1]");
  require(c.alpha > 0.0, "alpha must be positive");
  require(c.step_gamma > 0.0, "step_gamma must be positive");
  require(c.theta >= 0.5 && c.theta <= 1.0, "theta must lie in [0.5, 1]");
  require(c.threshold_gamma > 0.0, "threshold_gamma must be positive");
  require(c.K >= 0, "K must be >= 0");
  require(!c.seeds.empty(), "seed must list at least one seed");
  require(c.b_M > 0.0, "b_M must be positive");
  require(c.sigma_N >= 0.0 && c.sigma_N < 1.0, "sigma_N must lie in [0, 1)");
  require(c.B2 >= 1, "B2 must be >= 1");
  require(c.init_scale >= 0.0, "init_scale must be >= 0");
  require(!c.out_dir.empty(), "out_dir must not be empty");
}

void write_config(std::ostream& out, const ExperimentConfig& config) {
  for (const auto& k : keys()) out << k.name << " = " << k.get(config) << '\n';
}

std::vector<std::string> template_names() {
  return {"minimal", "diminishing", "constant_step", "tradeoff", "connectivity", "fmnist"};
}

std::string config_template(const std::string& name) {
  ExperimentConfig c;
  std::string intro;
  if (name == "minimal") {
    intro = "Smallest useful run: zero-threshold baseline on quadratic tasks.";
    c.policies = {PolicyKind::zero_threshold};
    c.K = 100;
  } else if (name == "diminishing") {
    intro = "Diminishing step alpha^(k) = 0.1 / sqrt(1 + k); gap and consensus should vanish.";
    c.heterogeneity = 1.0;
    c.curvature = 20.0;
    c.condition_cap = 1.2;
    c.rows_per_device = 100;
    c.batch_size = 50;
    c.per_device_init = true;
    c.init_scale = 3.0;
    c.K = 20000;
    c.seeds = {1, 2, 3, 4, 5};
  } else if (name == "constant_step") {
    intro = "Constant step; rerun with alpha halved to compare plateaus.";
    c.step = StepPolicy::Kind::constant;
    c.batch_size = 1;
    c.K = 50000;
    c.seeds = {1, 2, 3};
  } else if (name == "tradeoff") {
    intro = "All four policies on heterogeneous bandwidths, one label per device, five seeds.";
    c.task = TaskKind::synthetic_classification;
    c.policies = {PolicyKind::efhc, PolicyKind::global_threshold, PolicyKind::zero_threshold,
                  PolicyKind::randomized_gossip};
    c.r = 500.0;
    c.batch_size = 16;
    c.eval_every = 10;
    c.K = 2000;
    c.seeds = {1, 2, 3, 4, 5};
  } else if (name == "connectivity") {
    intro = "Cyclic physical graph with forced broadcasts; certify the info-flow window.";
    c.schedule = ScheduleMode::cyclic_partition;
    c.B1 = 3;
    c.enforce_B2 = true;
    c.B2 = 4;
    c.r = 1e6;
    c.K = 500;
  } else if (name == "fmnist") {
    intro = "Linear SVM on IDX image files, one label per device.";
    c.task = TaskKind::idx;
    c.train_images = "train-images-idx3-ubyte";
    c.train_labels = "train-labels-idx1-ubyte";
    c.test_images = "t10k-images-idx3-ubyte";
    c.test_labels = "t10k-labels-idx1-ubyte";
    c.labels_per_device = 1;
    c.batch_size = 16;
    c.policies = {PolicyKind::efhc, PolicyKind::global_threshold, PolicyKind::zero_threshold,
                  PolicyKind::randomized_gossip};
    c.eval_every = 50;
    c.K = 2000;
    c.seeds = {1, 2, 3, 4, 5};
  } else {
    std::string names;
    for (const auto& n : template_names()) names += (names.empty() ? "" : ", ") + n;
    throw InvalidArgument(fmt::format("unknown template '{}' (available: {})", name, names));
  }

  std::ostringstream out;
  out << "# " << intro << "\n#\n";
  for (const auto& k : keys()) {
    out << "# " << k.doc << '\n' << k.name << " = " << k.get(c) << '\n';
  }
  return out.str();
}

std::string resolve_data_path(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  if (const char* root = std::getenv(kDataRootEnv); root && *root) {
    return (std::filesystem::path(root) / p).string();
  }
  return path;
}

std::string task_name(TaskKind kind) { return from_enum(kind, kTasks); }
std::string schedule_name(ScheduleMode mode) { return from_enum(mode, kSchedules); }

}  // namespace efhc
