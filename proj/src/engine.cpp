#include "efhc/engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "efhc/error.hpp"

namespace efhc {

std::string policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::efhc: return "efhc";
    case PolicyKind::global_threshold: return "gt";
    case PolicyKind::zero_threshold: return "zt";
    case PolicyKind::randomized_gossip: return "rg";
  }
  return "unknown";
}

PolicyKind parse_policy(const std::string& name) {
  if (name == "efhc" || name == "ef-hc") return PolicyKind::efhc;
  if (name == "gt") return PolicyKind::global_threshold;
  if (name == "zt") return PolicyKind::zero_threshold;
  if (name == "rg") return PolicyKind::randomized_gossip;
  throw InvalidArgument(fmt::format("unknown policy \"{}\" (expected efhc, gt, zt, rg)", name));
}

bool broadcast_trigger(const ModelParams& w, const ModelParams& w_hat, int n, double r,
                       double rho, double gamma, bool inclusive) {
  if (n < 1) throw InvalidArgument("broadcast_trigger: dimension must be >= 1");
  if (w.size() != w_hat.size()) throw InvalidArgument("broadcast_trigger: size mismatch");
  const double drift = std::sqrt(1.0 / n) * (w - w_hat).norm();
  const double threshold = r * rho * gamma;
  return inclusive ? drift >= threshold : drift > threshold;
}

ModelParams aggregate(const ModelParams& w_i, std::span<const Received> received) {
  ModelParams out = w_i;
  for (const auto& msg : received) {
    if (msg.w->size() != w_i.size()) throw InvalidArgument("aggregate: dimension mismatch");
    out += msg.beta * (*msg.w - w_i);
  }
  return out;
}

double transmission_score(const GraphSnapshot& g, const TriggerVector& triggers,
                          std::span<const double> rho, int n) {
  const int m = g.size();
  if (static_cast<int>(rho.size()) != m || triggers.devices() != m) {
    throw InvalidArgument("transmission_score: per-device sizes differ from the graph");
  }
  if (m == 0) return 0.0;
  const auto degree = g.degrees();
  std::vector<int> used(m, 0);
  const auto used_graph = triggers.used_edges(g);
  for (const auto& e : used_graph.edges()) {
    ++used[e.a];
    ++used[e.b];
  }
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    if (degree[i] == 0) continue;
    total += static_cast<double>(used[i]) / degree[i] * rho[i] * n;
  }
  return total / m;
}

void validate(const SimulationSetup& setup) {
  const auto m = setup.tasks.size();
  if (m == 0) throw InvalidArgument("simulation needs at least one device");
  if (setup.schedule.base_graph.size() != static_cast<int>(m)) {
    throw InvalidArgument(fmt::format("topology has {} devices, {} tasks given",
                                      setup.schedule.base_graph.size(), m));
  }
  if (setup.schedule.window < 1) throw InvalidArgument("B1 must be >= 1");
  if (!(setup.schedule.subset_p >= 0.0 && setup.schedule.subset_p <= 1.0)) {
    throw InvalidArgument("subset probability must lie in [0, 1]");
  }
  if (setup.bandwidth.size() != m) throw InvalidArgument("one bandwidth per device required");
  for (double b : setup.bandwidth) {
    if (!(b > 0.0)) throw InvalidArgument("bandwidths must be positive");
  }
  if (!(setup.mean_bandwidth > 0.0)) throw InvalidArgument("mean bandwidth must be positive");
  const int n = model_dimension(setup.tasks.front());
  for (const auto& t : setup.tasks) {
    if (model_dimension(t) != n) throw InvalidArgument("all tasks must share a model dimension");
  }
  const auto& policy = setup.policy;
  if ((policy.kind == PolicyKind::efhc || policy.kind == PolicyKind::global_threshold) &&
      !(policy.r > 0.0)) {
    throw InvalidArgument("r must be positive");
  }
  if (policy.kind == PolicyKind::randomized_gossip &&
      !(policy.gossip_probability >= 0.0 && policy.gossip_probability <= 1.0)) {
    throw InvalidArgument("gossip probability must lie in (0, 1]");
  }
  validate(setup.step);
  if (setup.decay.kind == ThresholdDecay::Kind::constant && !(setup.decay.value > 0.0)) {
    throw InvalidArgument("threshold decay gamma must be positive");
  }
  const auto& opt = setup.options;
  if (opt.enforce_B2 && opt.B2 < 1) throw InvalidArgument("B2 must be >= 1");
  if (opt.batch_size < 0) throw InvalidArgument("batch size must be >= 0");
  if (opt.batch_size > 0) {
    for (const auto& t : setup.tasks) {
      if (opt.batch_size > data_point_count(t)) {
        throw InvalidArgument(fmt::format("batch size {} exceeds a device's {} data points",
                                          opt.batch_size, data_point_count(t)));
      }
    }
  }
  if (opt.eval_every < 1) throw InvalidArgument("eval_every must be >= 1");
  if (setup.optimum && setup.optimum->size() != n) {
    throw InvalidArgument("optimum dimension differs from the model dimension");
  }
}

Simulation::Simulation(SimulationSetup setup) : setup_(std::move(setup)) {
  validate(setup_);
  dimension_ = model_dimension(setup_.tasks.front());
  const int m = static_cast<int>(setup_.tasks.size());
  Eigen::MatrixXd initial(m, dimension_);
  const auto& opt = setup_.options;
  if (opt.per_device_init) {
    for (int i = 0; i < m; ++i) {
      auto rng = make_rng({setup_.seed, 0x494eull, static_cast<std::uint64_t>(i)});
      for (int j = 0; j < dimension_; ++j) initial(i, j) = opt.init_scale * standard_normal(rng);
    }
  } else {
    auto rng = make_rng({setup_.seed, 0x494eull});
    ModelParams w0(dimension_);
    for (int j = 0; j < dimension_; ++j) w0(j) = opt.init_scale * standard_normal(rng);
    initial.rowwise() = w0.transpose();
  }
  init_devices(initial);
}

Simulation::Simulation(SimulationSetup setup, const Eigen::MatrixXd& initial_models)
    : setup_(std::move(setup)) {
  validate(setup_);
  dimension_ = model_dimension(setup_.tasks.front());
  if (initial_models.rows() != static_cast<Eigen::Index>(setup_.tasks.size()) ||
      initial_models.cols() != dimension_) {
    throw InvalidArgument("initial models must be devices x dimension");
  }
  init_devices(initial_models);
}

void Simulation::init_devices(const Eigen::MatrixXd& initial) {
  const int m = static_cast<int>(initial.rows());
  devices_.resize(m);
  previous_ = GraphSnapshot(m);
  for (int i = 0; i < m; ++i) {
    auto& d = devices_[i];
    d.w = initial.row(i).transpose();
    d.w_hat = d.w;
    d.bandwidth = setup_.bandwidth[i];
    d.resource = 1.0 / d.bandwidth;
    gradient_rng_.push_back(make_rng({setup_.seed, 0x4752ull, static_cast<std::uint64_t>(i)}));
    trigger_rng_.push_back(make_rng({setup_.seed, 0x5452ull, static_cast<std::uint64_t>(i)}));
  }
}

Eigen::MatrixXd Simulation::models() const {
  Eigen::MatrixXd W(devices(), dimension_);
  for (int i = 0; i < devices(); ++i) W.row(i) = devices_[i].w.transpose();
  return W;
}

bool Simulation::decide(int i, double gamma) {
  const auto& policy = setup_.policy;
  const auto& d = devices_[i];
  switch (policy.kind) {
    case PolicyKind::zero_threshold:
      return true;
    case PolicyKind::randomized_gossip: {
      const double p = policy.gossip_probability > 0.0 ? policy.gossip_probability
                                                       : 1.0 / static_cast<double>(devices());
      return uniform01(trigger_rng_[i]) < p;
    }
    case PolicyKind::global_threshold:
      return broadcast_trigger(d.w, d.w_hat, dimension_, policy.r, 1.0 / setup_.mean_bandwidth,
                               gamma, setup_.options.inclusive_trigger);
    case PolicyKind::efhc:
      return broadcast_trigger(d.w, d.w_hat, dimension_, policy.r, d.resource, gamma,
                               setup_.options.inclusive_trigger);
  }
  return false;
}

IterationRecord Simulation::step() {
  const int m = devices();
  const auto& opt = setup_.options;

  IterationRecord rec;
  rec.k = k_;
  rec.physical = snapshot_at(setup_.schedule, k_);
  rec.alpha = step_size(setup_.step, k_);
  rec.gamma = setup_.decay.kind == ThresholdDecay::Kind::follow_step ? rec.alpha
                                                                     : setup_.decay.value;
  const auto& g = rec.physical;
  const auto degree = g.degrees();
  const auto adj = g.adjacency();

  // Links absent at k-1 exchange (w, d) now.
  rec.triggers = TriggerVector(m);
  for (const auto& e : g.edges()) {
    if (!previous_.has_edge(e.a, e.b)) rec.triggers.connection_exchanges.push_back(e);
  }
  for (int i = 0; i < m; ++i) {
    devices_[i].neighbors = adj[i];
    devices_[i].neighbor_degrees.clear();
    for (int j : adj[i]) devices_[i].neighbor_degrees.push_back(degree[j]);
  }

  // Broadcast decisions on w^(k); triggering devices refresh w_hat.
  for (int i = 0; i < m; ++i) {
    bool fire = decide(i, rec.gamma);
    if (opt.enforce_B2 && k_ - devices_[i].last_broadcast >= opt.B2) fire = true;
    rec.triggers.broadcast[i] = fire;
  }
  for (int i = 0; i < m; ++i) {
    if (rec.triggers.broadcast[i]) {
      devices_[i].w_hat = devices_[i].w;
      devices_[i].last_broadcast = k_;
      ++rec.broadcasts;
    }
  }
  rec.used = rec.triggers.used_edges(g);

  // Aggregation and the local gradient step read only w^(k), so devices update independently.
  std::vector<std::vector<Received>> inbox(m);
  for (const auto& e : rec.used.edges()) {
    const double beta = metropolis_weight(degree[e.a], degree[e.b]);
    inbox[e.a].push_back({&devices_[e.b].w, beta});
    inbox[e.b].push_back({&devices_[e.a].w, beta});
  }
  // Inbox order by sender id keeps the summation order fixed.
  for (int i = 0; i < m; ++i) {
    std::sort(inbox[i].begin(), inbox[i].end(), [&](const Received& x, const Received& y) {
      return x.w < y.w;
    });
  }

  const bool all_hinge = std::all_of(setup_.tasks.begin(), setup_.tasks.end(),
                                     [](const LocalTask& t) { return std::holds_alternative<HingeTask>(t); });
  const bool outer_parallel = opt.exec == kernels::Exec::parallel && !all_hinge;
  const auto inner_exec = outer_parallel ? kernels::Exec::serial : opt.exec;

  rec.gradients.resize(m, dimension_);
  std::vector<ModelParams> next(m);
#pragma omp parallel for schedule(static) if (outer_parallel)
  for (int i = 0; i < m; ++i) {
    const auto& task = setup_.tasks[i];
    const ModelParams& w = devices_[i].w;
    ModelParams grad = opt.batch_size > 0
                           ? stochastic_grad(task, w, opt.batch_size, gradient_rng_[i], inner_exec)
                           : local_grad(task, w, inner_exec);
    ModelParams mixed = inbox[i].empty() ? w : aggregate(w, inbox[i]);
    next[i] = mixed - rec.alpha * grad;
    rec.gradients.row(i) = grad.transpose();
  }
  for (int i = 0; i < m; ++i) devices_[i].w = std::move(next[i]);

  std::vector<double> rho(m);
  for (int i = 0; i < m; ++i) rho[i] = devices_[i].resource;
  if (opt.count_connection_exchanges) {
    rec.transmission_score = transmission_score(g, rec.triggers, rho, dimension_);
  } else {
    TriggerVector broadcasts_only = rec.triggers;
    broadcasts_only.connection_exchanges.clear();
    rec.transmission_score = transmission_score(g, broadcasts_only, rho, dimension_);
  }

  previous_ = g;
  ++k_;
  return rec;
}

double consensus_error(const Eigen::MatrixXd& W) {
  const Eigen::RowVectorXd mean = W.colwise().mean();
  return (W.rowwise() - mean).squaredNorm();
}

double optimality_gap(const Eigen::MatrixXd& W, const ModelParams& optimum) {
  return (W.colwise().mean().transpose() - optimum).squaredNorm();
}

namespace {

double mean_accuracy(const Simulation& sim) {
  const auto& test = sim.setup().test_set;
  if (!test) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& d : sim.states()) total += classification_accuracy(d.w, *test);
  return total / sim.devices();
}

}  // namespace

RunResult run(const SimulationSetup& setup, long long iterations) {
  if (iterations < 0) throw InvalidArgument("iteration count must be >= 0");
  Simulation sim(setup);
  RunResult out;
  out.info_flow = InfoFlowLog(sim.devices());
  auto& t = out.trace;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double cumulative = 0.0;
  double accuracy = nan;
  for (long long k = 0; k < iterations; ++k) {
    const Eigen::MatrixXd W = sim.models();
    if (k % setup.options.eval_every == 0) accuracy = mean_accuracy(sim);
    auto rec = sim.step();
    cumulative += rec.transmission_score;
    t.k.push_back(k);
    t.consensus_error.push_back(consensus_error(W));
    t.optimality_gap.push_back(setup.optimum ? optimality_gap(W, *setup.optimum) : nan);
    t.broadcasts.push_back(rec.broadcasts);
    t.transmission_score.push_back(rec.transmission_score);
    t.cumulative_time.push_back(cumulative);
    t.mean_accuracy.push_back(accuracy);
    out.info_flow.push(std::move(rec.used));
  }
  return out;
}

namespace {

std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.17g}", v);
}

double parse_value(const std::string& s, std::size_t line) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(fmt::format("trace line {}: bad number \"{}\"", line, s));
  }
}

}  // namespace

void write_trace_csv(std::ostream& out, const MetricsTrace& t) {
  out << kTraceHeader << '\n';
  for (std::size_t r = 0; r < t.size(); ++r) {
    out << t.k[r] << ',' << format_value(t.consensus_error[r]) << ','
        << format_value(t.optimality_gap[r]) << ',' << t.broadcasts[r] << ','
        << format_value(t.transmission_score[r]) << ',' << format_value(t.cumulative_time[r])
        << ',' << format_value(t.mean_accuracy[r]) << '\n';
  }
}

MetricsTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw FormatError("trace: missing or unexpected header");
  }
  MetricsTrace t;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) {
      throw FormatError(fmt::format("trace line {}: expected 7 columns, got {}", line_no, cells.size()));
    }
    t.k.push_back(static_cast<long long>(parse_value(cells[0], line_no)));
    t.consensus_error.push_back(parse_value(cells[1], line_no));
    t.optimality_gap.push_back(parse_value(cells[2], line_no));
    t.broadcasts.push_back(static_cast<int>(parse_value(cells[3], line_no)));
    t.transmission_score.push_back(parse_value(cells[4], line_no));
    t.cumulative_time.push_back(parse_value(cells[5], line_no));
    t.mean_accuracy.push_back(parse_value(cells[6], line_no));
  }
  return t;
}

MetricsTrace read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument(fmt::format("cannot open trace {}", path));
  return read_trace_csv(in);
}

}  // namespace efhc
