#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "efhc/data.hpp"
#include "efhc/learning.hpp"
#include "efhc/mixing.hpp"
#include "efhc/topology.hpp"

namespace efhc {

// --- trigger policies --------------------------------------------------------

enum class PolicyKind {
  efhc,               // threshold r * (1 / b_i) * gamma^(k), per device
  global_threshold,   // GT: threshold r * (1 / b_M) * gamma^(k), shared
  zero_threshold,     // ZT: broadcast every iteration
  randomized_gossip,  // RG: broadcast with fixed probability
};

struct TriggerPolicy {
  PolicyKind kind = PolicyKind::efhc;
  double r = 1.0;
  double gossip_probability = 0.0;  // 0 selects 1/m

  static TriggerPolicy efhc(double r) { return {PolicyKind::efhc, r, 0.0}; }
  static TriggerPolicy global_threshold(double r) { return {PolicyKind::global_threshold, r, 0.0}; }
  static TriggerPolicy zero_threshold() { return {PolicyKind::zero_threshold, 1.0, 0.0}; }
  static TriggerPolicy randomized_gossip(double p = 0.0) {
    return {PolicyKind::randomized_gossip, 1.0, p};
  }
};

std::string policy_name(PolicyKind kind);
PolicyKind parse_policy(const std::string& name);

// gamma^(k): tracks the step size by default, or stays fixed.
struct ThresholdDecay {
  enum class Kind { follow_step, constant };
  Kind kind = Kind::follow_step;
  double value = 1.0;
};

// (1/n)^(1/2) ||w - w_hat|| >= r * rho * gamma  (or > when not inclusive).
bool broadcast_trigger(const ModelParams& w, const ModelParams& w_hat, int n, double r,
                       double rho, double gamma, bool inclusive = true);

// w_i + sum_j beta_ij (w_j - w_i).
struct Received {
  const ModelParams* w = nullptr;
  double beta = 0.0;
};
ModelParams aggregate(const ModelParams& w_i, std::span<const Received> received);

// (1/m) sum_i (sum_j v_ij / d_i) rho_i n; devices with d_i = 0 add nothing.
double transmission_score(const GraphSnapshot& g, const TriggerVector& triggers,
                          std::span<const double> rho, int n);

// --- simulation ---------------------------------------------------------------

struct EngineOptions {
  bool inclusive_trigger = true;
  bool enforce_B2 = false;               // force a broadcast after B2 - 1 silent iterations
  int B2 = 1;
  bool count_connection_exchanges = true;  // in the transmission score
  int batch_size = 0;                     // 0 = full local gradient (no noise)
  bool per_device_init = false;
  double init_scale = 1.0;
  int eval_every = 1;                     // accuracy evaluation period
  kernels::Exec exec = kernels::default_exec();
};

struct SimulationSetup {
  std::vector<LocalTask> tasks;
  TopologySchedule schedule;
  TriggerPolicy policy;
  StepPolicy step;
  ThresholdDecay decay;
  std::vector<double> bandwidth;            // b_i
  double mean_bandwidth = 1.0;              // b_M, for GT
  std::optional<ModelParams> optimum;       // w*, when known
  std::shared_ptr<const SampleSet> test_set;  // accuracy, classification only
  EngineOptions options;
  std::uint64_t seed = 1;
};

void validate(const SimulationSetup& setup);

struct DeviceState {
  ModelParams w;
  ModelParams w_hat;  // last broadcast copy
  double bandwidth = 1.0;
  double resource = 1.0;  // rho_i = 1 / b_i
  std::vector<int> neighbors;
  std::vector<int> neighbor_degrees;
  long long last_broadcast = -1;
};

struct IterationRecord {
  long long k = 0;
  GraphSnapshot physical;   // G^(k)
  TriggerVector triggers;   // v_i and connection exchanges
  GraphSnapshot used;       // E'^(k)
  double alpha = 0.0;
  double gamma = 0.0;
  Eigen::MatrixXd gradients;  // G^(k), one row per device
  int broadcasts = 0;
  double transmission_score = 0.0;
};

// One EF-HC (or baseline) network. `step` runs the four events of one
// iteration for every device; the composite update is
// W^(k+1) = P^(k) W^(k) - alpha^(k) G^(k).
class Simulation {
 public:
  explicit Simulation(SimulationSetup setup);
  Simulation(SimulationSetup setup, const Eigen::MatrixXd& initial_models);

  IterationRecord step();

  long long iteration() const { return k_; }
  int devices() const { return static_cast<int>(devices_.size()); }
  int dimension() const { return dimension_; }
  const std::vector<DeviceState>& states() const { return devices_; }
  const SimulationSetup& setup() const { return setup_; }
  Eigen::MatrixXd models() const;

 private:
  void init_devices(const Eigen::MatrixXd& initial);
  bool decide(int i, double gamma);

  SimulationSetup setup_;
  int dimension_ = 0;
  long long k_ = 0;
  std::vector<DeviceState> devices_;
  GraphSnapshot previous_;
  std::vector<Rng> gradient_rng_;
  std::vector<Rng> trigger_rng_;
};

// --- traces ---------------------------------------------------------------------

// Row k describes the state W^(k) and the exchanges made during iteration k.
// cumulative_time includes iteration k's score. Metrics that do not apply
// (gap without w*, accuracy without a test set) are NaN.
struct MetricsTrace {
  std::vector<long long> k;
  std::vector<double> consensus_error;
  std::vector<double> optimality_gap;
  std::vector<int> broadcasts;
  std::vector<double> transmission_score;
  std::vector<double> cumulative_time;
  std::vector<double> mean_accuracy;

  std::size_t size() const { return k.size(); }
};

inline constexpr const char* kTraceHeader =
    "k,consensus_error,optimality_gap,broadcasts,transmission_score,cumulative_time,mean_accuracy";

void write_trace_csv(std::ostream& out, const MetricsTrace& trace);
MetricsTrace read_trace_csv(std::istream& in);
MetricsTrace read_trace_file(const std::string& path);

double consensus_error(const Eigen::MatrixXd& W);
double optimality_gap(const Eigen::MatrixXd& W, const ModelParams& optimum);

struct RunResult {
  MetricsTrace trace;
  InfoFlowLog info_flow;
};

RunResult run(const SimulationSetup& setup, long long iterations);

}  // namespace efhc
