// Acceptance suite: one PASS/FAIL line per criterion, exit 3 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "efhc/analysis.hpp"
#include "efhc/config.hpp"
#include "efhc/data.hpp"
#include "efhc/engine.hpp"
#include "efhc/mixing.hpp"
#include "efhc/suite.hpp"
#include "oracles.hpp"

using namespace efhc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

ExperimentConfig from_template(const std::string& name) {
  std::istringstream in(config_template(name));
  return parse_config(in);
}

GraphSnapshot random_graph(int m, double p, Rng& rng) {
  std::vector<Edge> e;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      if (uniform01(rng) < p) e.emplace_back(i, j);
    }
  }
  return GraphSnapshot(m, e);
}

TriggerVector random_triggers(const GraphSnapshot& g, Rng& rng) {
  const int m = g.size();
  TriggerVector t(m);
  const double p = uniform01(rng);
  for (int i = 0; i < m; ++i) t.broadcast[i] = uniform01(rng) < p;
  for (const auto& e : g.edges()) {
    if (uniform01(rng) < 0.1) t.connection_exchanges.push_back(e);
  }
  return t;
}

long long total(const std::vector<int>& v) {
  long long s = 0;
  for (int x : v) s += x;
  return s;
}

// 1. Every transition matrix built from a random graph and trigger vector is
// symmetric doubly stochastic with a positive diagonal.
Outcome stochasticity() {
  Rng rng = make_rng({1001});
  int bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const int m = 2 + t % 19;
    const auto g = random_graph(m, uniform01(rng), rng);
    const auto P = build_transition(g, random_triggers(g, rng));
    if (!validate_stochasticity(P, 1e-12)) ++bad;
  }
  return {bad == 0, fmt::format("{} of 1000 matrices failed at tol 1e-12", bad)};
}

// 2. Engine state against the explicit recursion W <- P W - alpha G.
Outcome engine_matrix_oracle() {
  double worst = 0.0;
  const ScheduleMode modes[] = {ScheduleMode::static_graph, ScheduleMode::cyclic_partition,
                                ScheduleMode::random_subset};
  const PolicyKind policies[] = {PolicyKind::efhc, PolicyKind::global_threshold,
                                 PolicyKind::zero_threshold, PolicyKind::randomized_gossip};
  for (int r = 0; r < 100; ++r) {
    ExperimentConfig c;
    c.m = 4 + r % 9;
    c.n = 3 + r % 5;
    c.rows_per_device = c.n + 5;
    c.schedule = modes[r % 3];
    c.B1 = 1 + r % 4;
    c.r = 5000 * std::pow(10.0, -3 + r % 4);
    c.step = r % 2 ? StepPolicy::Kind::constant : StepPolicy::Kind::diminishing;
    c.alpha = 0.05;
    c.per_device_init = true;
    c.connectivity = 0.5;
    auto setup = build_setup(c, policies[r % 4], static_cast<std::uint64_t>(r + 1), {});
    setup.options.exec = kernels::Exec::serial;
    Simulation sim(setup);
    for (int k = 0; k < 100; ++k) {
      const Eigen::MatrixXd W = sim.models();
      const auto rec = sim.step();
      Eigen::MatrixXd G(W.rows(), W.cols());
      for (Eigen::Index i = 0; i < W.rows(); ++i) {
        G.row(i) = local_grad(setup.tasks[i], W.row(i).transpose(), kernels::Exec::serial).transpose();
      }
      const auto P = build_transition(rec.physical, rec.triggers);
      const Eigen::MatrixXd expect = oracle::naive_product(P.matrix(), W) - rec.alpha * G;
      worst = std::max(worst, (sim.models() - expect).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-12, fmt::format("max deviation {:.3g} over 100 runs x 100 iterations", worst)};
}

// 3. Forced broadcasts give a B-connected information flow.
Outcome certification() {
  int violations = 0, disagreements = 0;
  const ScheduleMode modes[] = {ScheduleMode::static_graph, ScheduleMode::cyclic_partition,
                                ScheduleMode::random_subset};
  for (int r = 0; r < 100; ++r) {
    ExperimentConfig c;
    c.m = 3 + r % 10;
    c.schedule = modes[r % 3];
    c.B1 = c.schedule == ScheduleMode::static_graph ? 1 : 1 + r % 4;
    c.B2 = 1 + (r * 7) % 6;
    c.enforce_B2 = true;
    c.subset_p = 0.3;
    c.r = r % 2 ? 1e12 : 50.0;  // silent devices, or natural triggers plus forcing
    c.connectivity = 0.6;
    const auto setup = build_setup(c, PolicyKind::efhc, static_cast<std::uint64_t>(r + 1), {});
    const auto res = run(setup, 200);
    const int B = compute_window_B(c.B1, c.B2);
    const auto report = certify_B_connectivity(res.info_flow, B);
    violations += static_cast<int>(report.violations.size());
    if (report.violations != oracle::brute_force_violations(res.info_flow, B)) ++disagreements;
  }
  return {violations == 0 && disagreements == 0,
          fmt::format("{} violating windows, {} disagreements with brute force", violations,
                      disagreements)};
}

// 4. Diminishing step: consensus and optimality gap vanish at the expected rate.
Outcome diminishing_step() {
  auto c = from_template("diminishing");
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : c.seeds) {
    const auto start = std::chrono::steady_clock::now();
    const auto t = run(build_setup(c, PolicyKind::efhc, seed, {}), c.K).trace;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double ce = t.consensus_error.back() / t.consensus_error.front();
    const double gap = t.optimality_gap.back() / t.optimality_gap.front();
    const double slope = fit_rate(t.optimality_gap, trailing_half(t.size())).slope;
    const bool pass = ce < 1e-3 && gap < 1e-3 && slope >= -0.8 && slope <= -0.3 && secs < 60;
    ok = ok && pass;
    detail += fmt::format("{}seed {}: ce {:.2g} gap {:.2g} slope {:.3f} {:.1f}s{}",
                          detail.empty() ? "" : "; ", seed, ce, gap, slope, secs, pass ? "" : " (fail)");
  }
  return {ok, detail};
}

// 5. Constant step: the optimality gap plateaus, and halving alpha lowers it.
Outcome constant_step() {
  auto c = from_template("constant_step");
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : c.seeds) {
    auto half = c;
    half.alpha = c.alpha / 2;
    const double p1 = plateau_level(run(build_setup(c, PolicyKind::efhc, seed, {}), c.K).trace.optimality_gap, 0.5);
    const double p2 = plateau_level(run(build_setup(half, PolicyKind::efhc, seed, {}), c.K).trace.optimality_gap, 0.5);
    const double ratio = p1 / p2;
    const bool pass = p1 > 0 && p2 > 0 && ratio >= 1.5 && ratio <= 8.0;
    ok = ok && pass;
    detail += fmt::format("{}seed {}: {:.3g}/{:.3g} = {:.2f}{}", detail.empty() ? "" : "; ", seed, p1,
                          p2, ratio, pass ? "" : " (fail)");
  }
  return {ok, detail};
}

// 6. Broadcast counts fall with r; baselines broadcast at their nominal rates.
Outcome trigger_sparsity() {
  ExperimentConfig c;
  c.K = 2000;
  bool ok = true;
  std::string detail;
  for (auto p : {PolicyKind::efhc, PolicyKind::global_threshold}) {
    std::vector<long long> counts;
    for (double scale : {1e-3, 1e-2, 1e-1, 1.0, 10.0}) {
      c.r = c.b_M * scale;
      counts.push_back(total(run(build_setup(c, p, 1, {}), c.K).trace.broadcasts));
    }
    const bool mono = std::is_sorted(counts.rbegin(), counts.rend());
    ok = ok && mono;
    detail += fmt::format("{} {}{}; ", policy_name(p), fmt::join(counts, " "), mono ? "" : " (not monotone)");
  }
  c.r = 50;
  const long long zt = total(run(build_setup(c, PolicyKind::zero_threshold, 1, {}), c.K).trace.broadcasts);
  ok = ok && zt == c.m * c.K;
  detail += fmt::format("zt {} of {}; ", zt, c.m * c.K);

  Simulation sim(build_setup(c, PolicyKind::randomized_gossip, 1, {}));
  const int K = 10000;
  std::vector<int> per(c.m, 0);
  for (int k = 0; k < K; ++k) {
    const auto rec = sim.step();
    for (int i = 0; i < c.m; ++i) per[i] += rec.triggers.broadcast[i];
  }
  const double p = 1.0 / c.m, sd = std::sqrt(K * p * (1 - p));
  double worst = 0.0;
  for (int n : per) worst = std::max(worst, std::abs(n - K * p) / sd);
  ok = ok && worst <= 3.0;
  detail += fmt::format("rg max deviation {:.2f} sd", worst);
  return {ok, detail};
}

// 7. Heterogeneous thresholds beat a global one at matched transmission time.
Outcome heterogeneity_benefit() {
  auto c = from_template("tradeoff");
  int wins = 0, below_zt = 0;
  std::string detail;
  for (std::uint64_t seed : c.seeds) {
    const auto a = run(build_setup(c, PolicyKind::efhc, seed, {}), c.K).trace;
    const auto b = run(build_setup(c, PolicyKind::global_threshold, seed, {}), c.K).trace;
    const auto z = run(build_setup(c, PolicyKind::zero_threshold, seed, {}), c.K).trace;
    const auto table = tradeoff_table({{"efhc", &a}, {"gt", &b}}, TradeoffMetric::mean_accuracy);
    const double share = matched_time_share(table, 0, 1);
    const bool win = share >= 0.8;
    const double sa = a.cumulative_time.back() / c.K, sz = z.cumulative_time.back() / c.K;
    wins += win;
    below_zt += sa < sz;
    detail += fmt::format("seed {}: share {:.2f}{} score {:.3g} vs zt {:.3g}; ", seed, share,
                          win ? "" : " (gt ahead)", sa, sz);
  }
  const int need = static_cast<int>(std::ceil(0.8 * c.seeds.size()));
  detail += fmt::format("{}/{} seeds dominate (need {}), {}/{} below zt", wins, c.seeds.size(), need,
                        below_zt, c.seeds.size());
  return {wins >= need && below_zt == static_cast<int>(c.seeds.size()), detail};
}

// 8. The product bound holds on random valid inputs.
Outcome bernoulli() {
  Rng rng = make_rng({1008});
  int bad = 0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t len = 1 + static_cast<std::size_t>(uniform01(rng) * 300);
    std::vector<double> zeta(len);
    const double scale = std::pow(10.0, -5.0 * uniform01(rng));
    for (auto& z : zeta) z = std::max(1e-15, scale * (1.0 - uniform01(rng)));
    const double p = 1.0 + 50.0 * uniform01(rng);
    const auto s = static_cast<std::size_t>(uniform01(rng) * len);
    const auto k = s + static_cast<std::size_t>(uniform01(rng) * (len - s));
    if (!bernoulli_bound_check(zeta, p, s, k)) ++bad;
  }
  return {bad == 0, fmt::format("{} of 10000 draws violated the bound", bad)};
}

// 9. Window products contract off consensus iff the window's flow is connected.
Outcome spectral_dichotomy() {
  Rng rng = make_rng({1009});
  int connected = 0, wrong = 0;
  for (int t = 0; t < 200; ++t) {
    const int m = 3 + t % 10;
    const auto base = random_graph(m, 0.2 + 0.6 * uniform01(rng), rng);
    const int len = 1 + t % 5;
    std::vector<TransitionMatrix> window;
    std::vector<GraphSnapshot> used;
    for (int s = 0; s < len; ++s) {
      TriggerVector trig(m);
      for (int i = 0; i < m; ++i) trig.broadcast[i] = uniform01(rng) < 0.25;
      window.insert(window.begin(), build_transition(base, trig));
      used.push_back(trig.used_edges(base));
    }
    const double sigma = consensus_spectral_norm(window_product(window));
    const bool conn = oracle::bfs_connected(union_graph(used));
    connected += conn;
    const bool ok = conn ? sigma < 1.0 - 1e-9 : std::abs(sigma - 1.0) <= 1e-9;
    wrong += !ok;
  }
  return {wrong == 0, fmt::format("{} windows connected, {} misclassified", connected, wrong)};
}

ModelParams numeric_grad(const LocalTask& task, const ModelParams& w, double h) {
  ModelParams g(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    ModelParams hi = w, lo = w;
    hi(i) += h;
    lo(i) -= h;
    g(i) = (local_loss(task, hi) - local_loss(task, lo)) / (2 * h);
  }
  return g;
}

// 10. Analytic gradients against finite differences; minibatch gradients unbiased.
Outcome gradient_correctness() {
  Rng rng = make_rng({1010});
  ExperimentConfig q;
  const auto quad = build_setup(q, PolicyKind::efhc, 1, {});
  ExperimentConfig h;
  h.task = TaskKind::synthetic_classification;
  h.samples = 200;
  h.features = 6;
  h.classes = 4;
  h.m = 4;
  const auto hinge = build_setup(h, PolicyKind::efhc, 1, {});

  double worst = 0.0;
  for (const auto* setup : {&quad, &hinge}) {
    const auto& task = setup->tasks[0];
    const int n = model_dimension(task);
    for (int t = 0; t < 100; ++t) {
      ModelParams w(n);
      for (int i = 0; i < n; ++i) w(i) = standard_normal(rng);
      const auto g = local_grad(task, w);
      const auto fd = numeric_grad(task, w, 1e-6);
      worst = std::max(worst, (g - fd).norm() / std::max(g.norm(), 1e-8));
    }
  }

  // Mean of 10000 minibatch gradients per coordinate, against 3 standard errors.
  int outside = 0, coords = 0;
  for (const auto* setup : {&quad, &hinge}) {
    const auto& task = setup->tasks[1];
    const int n = model_dimension(task);
    ModelParams w(n);
    for (int i = 0; i < n; ++i) w(i) = standard_normal(rng);
    const auto exact = local_grad(task, w);
    const int draws = 10000;
    const int batch = std::max(1, data_point_count(task) / 4);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n), sum2 = Eigen::VectorXd::Zero(n);
    for (int d = 0; d < draws; ++d) {
      const Eigen::VectorXd e = stochastic_grad(task, w, batch, rng) - exact;
      sum += e;
      sum2 += e.cwiseProduct(e);
    }
    for (int i = 0; i < n; ++i) {
      const double mean = sum(i) / draws;
      const double var = sum2(i) / draws - mean * mean;
      if (var == 0.0) continue;  // coordinate with no sampling variance
      ++coords;
      if (std::abs(mean) > 3.0 * std::sqrt(var / draws)) ++outside;
    }
  }
  return {worst <= 1e-4 && outside == 0,
          fmt::format("max relative fd error {:.2g}; {} of {} coordinates beyond 3 SE", worst,
                      outside, coords)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// 11. A rerun of a suite reproduces every trace byte for byte.
Outcome determinism() {
  auto c = from_template("tradeoff");
  c.K = 300;
  c.seeds = {1, 2};
  const fs::path root = fs::temp_directory_path() / "efhc_acceptance_determinism";
  fs::remove_all(root);
  std::ostringstream log;
  run_suite(c, (root / "a").string(), log);
  c.parallel_runs = true;
  run_suite(c, (root / "b").string(), log);
  int compared = 0, differ = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    if (!e.is_directory()) continue;
    const auto name = e.path().filename();
    ++compared;
    if (slurp(e.path() / kTraceFile) != slurp(root / "b" / name / kTraceFile)) ++differ;
  }
  fs::remove_all(root);
  return {compared == 8 && differ == 0,
          fmt::format("{} trace files compared, {} differ", compared, differ)};
}

struct Criterion {
  const char* name;
  double max_seconds;  // 0: no stated bound
  std::function<Outcome()> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"1 stochasticity of transition matrices", 10, stochasticity},
      {"2 engine matches matrix recursion", 30, engine_matrix_oracle},
      {"3 information-flow B-connectivity certified", 60, certification},
      {"4 diminishing step convergence and rate", 300, diminishing_step},
      {"5 constant step plateau scaling", 0, constant_step},
      {"6 trigger sparsity and baseline rates", 0, trigger_sparsity},
      {"7 heterogeneous thresholds vs global threshold", 0, heterogeneity_benefit},
      {"8 Bernoulli product bound", 5, bernoulli},
      {"9 spectral dichotomy of window products", 0, spectral_dichotomy},
      {"10 gradient correctness", 0, gradient_correctness},
      {"11 deterministic reruns", 0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.check();
    } catch (const std::exception& e) {
      out = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.max_seconds > 0 && secs >= c.max_seconds) {
      out.pass = false;
      out.detail += fmt::format("; exceeded {} s", c.max_seconds);
    }
    failed += !out.pass;
    std::printf("%s [%s] %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", c.name, out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 3;
}
