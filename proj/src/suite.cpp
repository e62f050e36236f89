#include "efhc/suite.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "efhc/analysis.hpp"
#include "efhc/data.hpp"
#include "efhc/error.hpp"

namespace efhc {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::shared_ptr<const SampleSet> load_set(const std::string& images, const std::string& labels,
                                          int limit) {
  return std::make_shared<const SampleSet>(
      load_idx_dataset(resolve_data_path(images), resolve_data_path(labels), limit));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("write failed for {}", path.string()));
}

std::string num(double v) { return std::isnan(v) ? "nan" : fmt::format("{:.17g}", v); }

struct RunSummary {
  PolicyKind policy;
  std::uint64_t seed = 0;
  long long iterations = 0;
  double consensus_error = kNaN;
  double optimality_gap = kNaN;
  double mean_accuracy = kNaN;
  double broadcasts = 0;
  double mean_score = kNaN;
  double total_time = 0;
};

RunSummary summarize(PolicyKind policy, std::uint64_t seed, const MetricsTrace& t) {
  RunSummary s{policy, seed};
  s.iterations = static_cast<long long>(t.size());
  if (t.size() == 0) return s;
  s.consensus_error = t.consensus_error.back();
  s.optimality_gap = t.optimality_gap.back();
  s.mean_accuracy = t.mean_accuracy.back();
  for (int b : t.broadcasts) s.broadcasts += b;
  s.total_time = t.cumulative_time.back();
  s.mean_score = s.total_time / static_cast<double>(t.size());
  return s;
}

constexpr const char* kSummaryHeader =
    "policy,seed,iterations,final_consensus_error,final_optimality_gap,final_mean_accuracy,"
    "total_broadcasts,mean_transmission_score,total_transmission_time";

void write_summary_row(std::ostream& out, const std::string& policy, const std::string& seed,
                       const RunSummary& s) {
  out << policy << ',' << seed << ',' << s.iterations << ',' << num(s.consensus_error) << ','
      << num(s.optimality_gap) << ',' << num(s.mean_accuracy) << ',' << num(s.broadcasts) << ','
      << num(s.mean_score) << ',' << num(s.total_time) << '\n';
}

}  // namespace

SuiteData load_suite_data(const ExperimentConfig& config) {
  SuiteData data;
  if (config.task == TaskKind::idx) {
    data.train = load_set(config.train_images, config.train_labels, config.train_limit);
    if (!config.test_images.empty()) {
      data.test = load_set(config.test_images, config.test_labels, config.test_limit);
    }
  }
  return data;
}

SimulationSetup build_setup(const ExperimentConfig& c, PolicyKind policy, std::uint64_t seed,
                            const SuiteData& data) {
  validate(c);
  SimulationSetup s;
  s.seed = seed;

  if (c.task == TaskKind::quadratic) {
    QuadraticSpec q;
    q.devices = c.m;
    q.dimension = c.n;
    q.rows_per_device = c.rows_per_device;
    q.heterogeneity = c.heterogeneity;
    q.curvature = c.curvature;
    q.condition_cap = c.condition_cap;
    q.seed = seed;
    s.tasks = synth_quadratic(q);
    s.optimum = global_optimum(s.tasks);
  } else {
    std::shared_ptr<const SampleSet> train = data.train;
    std::shared_ptr<const SampleSet> test = data.test;
    if (c.task == TaskKind::synthetic_classification) {
      // One draw split 4:1, so train and test share the class centers.
      const int test_samples = std::max(c.classes, c.samples / 4);
      const auto all =
          synth_classification(c.samples + test_samples, c.classes, c.features, c.spread, seed);
      std::vector<int> train_rows(c.samples);
      std::vector<int> test_rows(test_samples);
      for (int i = 0; i < c.samples; ++i) train_rows[i] = i;
      for (int i = 0; i < test_samples; ++i) test_rows[i] = c.samples + i;
      train = std::make_shared<const SampleSet>(subset(all, train_rows));
      test = std::make_shared<const SampleSet>(subset(all, test_rows));
    }
    if (!train) throw InvalidArgument("classification run without training data");
    const auto parts = label_partition(*train, c.m, c.labels_per_device, seed);
    for (int i = 0; i < c.m; ++i) {
      if (parts.rows[i].empty()) {
        throw InvalidArgument(fmt::format("device {} received no samples", i));
      }
      HingeTask h;
      h.data = train;
      h.rows = parts.rows[i];
      h.lambda = c.hinge_lambda;
      h.scale = 1.0 / static_cast<double>(h.rows.size());
      s.tasks.emplace_back(std::move(h));
    }
    s.test_set = test;
  }

  s.schedule.base_graph = gen_rgg(c.m, c.connectivity, seed, c.rgg_reading).graph;
  s.schedule.mode = c.schedule;
  s.schedule.window = c.schedule == ScheduleMode::static_graph ? 1 : c.B1;
  s.schedule.subset_p = c.subset_p;
  s.schedule.seed = seed;

  switch (policy) {
    case PolicyKind::efhc: s.policy = TriggerPolicy::efhc(c.r); break;
    case PolicyKind::global_threshold: s.policy = TriggerPolicy::global_threshold(c.r); break;
    case PolicyKind::zero_threshold: s.policy = TriggerPolicy::zero_threshold(); break;
    case PolicyKind::randomized_gossip: s.policy = TriggerPolicy::randomized_gossip(c.rg_prob); break;
  }
  s.step = c.step == StepPolicy::Kind::constant
               ? StepPolicy::constant(c.alpha)
               : StepPolicy::diminishing(c.alpha, c.step_gamma, c.theta);
  s.decay.kind = c.threshold_decay;
  s.decay.value = c.threshold_gamma;

  const auto bw = assign_bandwidths(c.m, c.b_M, c.sigma_N, seed);
  s.bandwidth = bw.bandwidth;
  s.mean_bandwidth = bw.mean;

  auto& o = s.options;
  o.inclusive_trigger = c.inclusive_trigger;
  o.enforce_B2 = c.enforce_B2;
  o.B2 = c.B2;
  o.count_connection_exchanges = c.count_connection_exchanges;
  o.batch_size = c.batch_size;
  o.per_device_init = c.per_device_init;
  o.init_scale = c.init_scale;
  o.eval_every = c.eval_every;
  return s;
}

std::string run_dir_name(PolicyKind policy, std::uint64_t seed) {
  return fmt::format("{}_seed{}", policy_name(policy), seed);
}

void run_suite(const ExperimentConfig& config, const std::string& out_dir, std::ostream& log) {
  validate(config);
  const fs::path root(out_dir);
  fs::create_directories(root);
  const fs::path marker = root / kPartialMarker;
  write_text(marker, "suite incomplete\n");

  struct Job {
    PolicyKind policy;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (auto p : config.policies) {
    for (auto s : config.seeds) jobs.push_back({p, s});
  }
  std::vector<RunSummary> summaries(jobs.size());
  std::vector<std::string> errors(jobs.size());

  const SuiteData data = load_suite_data(config);
  const auto n_jobs = static_cast<long long>(jobs.size());
#pragma omp parallel for schedule(dynamic) if (config.parallel_runs)
  for (long long j = 0; j < n_jobs; ++j) {
    const auto& job = jobs[j];
    try {
      ExperimentConfig single = config;
      single.policies = {job.policy};
      single.seeds = {job.seed};
      const fs::path dir = root / run_dir_name(job.policy, job.seed);
      fs::create_directories(dir);
      const auto result = run(build_setup(config, job.policy, job.seed, data), config.K);

      std::ostringstream trace, flow, snapshot;
      write_trace_csv(trace, result.trace);
      write_info_flow(flow, result.info_flow);
      write_config(snapshot, single);
      write_text(dir / kTraceFile, trace.str());
      write_text(dir / kInfoFlowFile, flow.str());
      write_text(dir / kConfigFile, snapshot.str());
      summaries[j] = summarize(job.policy, job.seed, result.trace);
    } catch (const std::exception& e) {
      errors[j] = e.what();
    }
  }

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto name = run_dir_name(jobs[j].policy, jobs[j].seed);
    if (!errors[j].empty()) {
      log << name << ": FAILED: " << errors[j] << '\n';
      throw std::runtime_error(fmt::format("run {} failed: {}", name, errors[j]));
    }
    log << name << ": done\n";
  }

  std::ostringstream snapshot;
  write_config(snapshot, config);
  write_text(root / kConfigFile, snapshot.str());

  std::ostringstream summary;
  summary << kSummaryHeader << '\n';
  for (const auto& s : summaries) {
    write_summary_row(summary, policy_name(s.policy), std::to_string(s.seed), s);
  }
  for (auto p : config.policies) {
    RunSummary mean{p};
    double count = 0;
    for (const auto& s : summaries) {
      if (s.policy != p) continue;
      const double w = 1.0 / static_cast<double>(config.seeds.size());
      mean.iterations = s.iterations;
      mean.consensus_error = (count == 0 ? 0 : mean.consensus_error) + w * s.consensus_error;
      mean.optimality_gap = (count == 0 ? 0 : mean.optimality_gap) + w * s.optimality_gap;
      mean.mean_accuracy = (count == 0 ? 0 : mean.mean_accuracy) + w * s.mean_accuracy;
      mean.broadcasts += w * s.broadcasts;
      mean.mean_score = (count == 0 ? 0 : mean.mean_score) + w * s.mean_score;
      mean.total_time += w * s.total_time;
      ++count;
    }
    write_summary_row(summary, policy_name(p), "mean", mean);
  }
  write_text(root / kSummaryFile, summary.str());
  fs::remove(marker);
}

// --- verification -------------------------------------------------------------

bool VerifyReport::any_failed() const {
  return std::any_of(criteria.begin(), criteria.end(),
                     [](const CriterionResult& c) { return c.verdict == Verdict::fail; });
}

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::pass: return "PASS";
    case Verdict::fail: return "FAIL";
    case Verdict::skipped: return "SKIPPED";
  }
  return "?";
}

namespace {

struct LoadedRun {
  PolicyKind policy;
  std::uint64_t seed;
  fs::path dir;
  MetricsTrace trace;
};

CriterionResult check_connectivity(const ExperimentConfig& c, const std::vector<LoadedRun>& runs) {
  CriterionResult r{"B-connectivity of the information flow", Verdict::skipped, ""};
  if (!c.enforce_B2) {
    r.detail = "enforce_B2 is off, so no window bound is guaranteed";
    return r;
  }
  const int b1 = c.schedule == ScheduleMode::static_graph ? 1 : c.B1;
  const int B = compute_window_B(b1, c.B2);
  std::size_t windows = 0;
  std::vector<std::string> bad;
  for (const auto& run : runs) {
    const auto log = read_info_flow_file((run.dir / kInfoFlowFile).string());
    if (log.size() < static_cast<std::size_t>(B)) {
      r.detail = fmt::format("K = {} is shorter than the window B = {}", log.size(), B);
      return r;
    }
    const auto report = certify_B_connectivity(log, B);
    windows += report.windows_checked;
    if (!report.certified()) {
      bad.push_back(fmt::format("{} ({} windows, first at k={})", run.dir.filename().string(),
                                report.violations.size(), report.violations.front()));
    }
  }
  if (bad.empty()) {
    r.verdict = Verdict::pass;
    r.detail = fmt::format("B = {}: {} windows certified across {} runs", B, windows, runs.size());
  } else {
    r.verdict = Verdict::fail;
    r.detail = fmt::format("B = {}: violations in ", B);
    for (std::size_t i = 0; i < bad.size(); ++i) r.detail += (i ? "; " : "") + bad[i];
  }
  return r;
}

constexpr long long kRateHorizon = 20000;

CriterionResult check_rate(const ExperimentConfig& c, const std::vector<LoadedRun>& runs) {
  CriterionResult r{"diminishing-step convergence and rate", Verdict::skipped, ""};
  if (c.task != TaskKind::quadratic || c.step != StepPolicy::Kind::diminishing || c.theta != 0.5) {
    r.detail = "needs quadratic tasks with a theta = 0.5 diminishing step";
    return r;
  }
  if (c.K < kRateHorizon) {
    r.detail = fmt::format("the rate band is stated for K >= {}", kRateHorizon);
    return r;
  }
  bool ok = true;
  std::string detail;
  for (const auto& run : runs) {
    if (run.policy != PolicyKind::efhc) continue;
    const auto& t = run.trace;
    const double gap = t.optimality_gap.back() / t.optimality_gap.front();
    const double ce0 = t.consensus_error.front();
    const double ce = ce0 > 0 ? t.consensus_error.back() / ce0 : kNaN;
    double slope = kNaN;
    try {
      slope = fit_rate(t.optimality_gap, trailing_half(t.size())).slope;
    } catch (const InvalidArgument&) {
    }
    const bool run_ok = gap < 1e-3 && (std::isnan(ce) || ce < 1e-3) && slope >= -0.8 &&
                        slope <= -0.3;
    ok = ok && run_ok;
    detail += fmt::format("{}seed {}: gap ratio {:.3g}, consensus ratio {:.3g}, slope {:.3f}",
                          detail.empty() ? "" : "; ", run.seed, gap, ce, slope);
  }
  if (detail.empty()) {
    r.detail = "no efhc runs";
    return r;
  }
  r.verdict = ok ? Verdict::pass : Verdict::fail;
  r.detail = detail + " (band [-0.8, -0.3], ratios < 1e-3)";
  return r;
}

CriterionResult check_plateau(const ExperimentConfig& c, const std::vector<LoadedRun>& runs) {
  CriterionResult r{"constant-step plateau", Verdict::skipped, ""};
  if (c.task != TaskKind::quadratic || c.step != StepPolicy::Kind::constant) {
    r.detail = "needs quadratic tasks with a constant step";
    return r;
  }
  bool ok = true;
  std::string detail;
  for (const auto& run : runs) {
    if (run.policy != PolicyKind::efhc || run.trace.size() == 0) continue;
    const double p = plateau_level(run.trace.optimality_gap, 0.5);
    ok = ok && p > 0.0 && std::isfinite(p);
    detail += fmt::format("{}seed {}: {:.4g}", detail.empty() ? "" : "; ", run.seed, p);
  }
  if (detail.empty()) {
    r.detail = "no efhc runs";
    return r;
  }
  r.verdict = ok ? Verdict::pass : Verdict::fail;
  r.detail = "plateau (median of last half) " + detail;
  return r;
}

const LoadedRun* find_run(const std::vector<LoadedRun>& runs, PolicyKind p, std::uint64_t seed) {
  for (const auto& r : runs) {
    if (r.policy == p && r.seed == seed) return &r;
  }
  return nullptr;
}

bool has_policy(const ExperimentConfig& c, PolicyKind p) {
  return std::find(c.policies.begin(), c.policies.end(), p) != c.policies.end();
}

// At least this share of the matched-time grid must favor EF-HC over GT for
// a seed to count as dominated.
constexpr double kDominanceShare = 0.8;

CriterionResult check_tradeoff(const ExperimentConfig& c, const std::vector<LoadedRun>& runs,
                               const fs::path& dir) {
  CriterionResult r{"efhc vs gt at matched transmission time", Verdict::skipped, ""};
  if (!has_policy(c, PolicyKind::efhc) || !has_policy(c, PolicyKind::global_threshold)) {
    r.detail = "needs both efhc and gt runs";
    return r;
  }
  if (c.K < 1) {
    r.detail = "empty traces";
    return r;
  }
  const auto metric = c.task == TaskKind::quadratic ? TradeoffMetric::optimality_gap
                                                    : TradeoffMetric::mean_accuracy;
  std::size_t wins = 0;
  std::string detail;
  for (auto seed : c.seeds) {
    const auto* a = find_run(runs, PolicyKind::efhc, seed);
    const auto* b = find_run(runs, PolicyKind::global_threshold, seed);
    const auto table = tradeoff_table({{"efhc", &a->trace}, {"gt", &b->trace}}, metric);
    std::ofstream csv(dir / fmt::format("tradeoff_seed{}.csv", seed));
    write_tradeoff_csv(csv, table);
    const double share = matched_time_share(table, 0, 1);
    if (share >= kDominanceShare) ++wins;
    detail += fmt::format("{}seed {}: {:.2f}", detail.empty() ? "" : "; ", seed, share);
  }
  const std::size_t needed =
      static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(c.seeds.size())));
  r.verdict = wins >= needed ? Verdict::pass : Verdict::fail;
  r.detail = fmt::format("{}/{} seeds dominated (need {}; share of grid where efhc >= gt: {})",
                         wins, c.seeds.size(), needed, detail);
  return r;
}

CriterionResult check_score(const ExperimentConfig& c, const std::vector<LoadedRun>& runs) {
  CriterionResult r{"efhc transmission score below zt", Verdict::skipped, ""};
  if (!has_policy(c, PolicyKind::efhc) || !has_policy(c, PolicyKind::zero_threshold) || c.K < 1) {
    r.detail = "needs efhc and zt runs";
    return r;
  }
  bool ok = true;
  std::string detail;
  for (auto seed : c.seeds) {
    const auto& a = find_run(runs, PolicyKind::efhc, seed)->trace;
    const auto& z = find_run(runs, PolicyKind::zero_threshold, seed)->trace;
    const double sa = a.cumulative_time.back() / static_cast<double>(a.size());
    const double sz = z.cumulative_time.back() / static_cast<double>(z.size());
    ok = ok && sa < sz;
    detail += fmt::format("{}seed {}: {:.4g} vs {:.4g}", detail.empty() ? "" : "; ", seed, sa, sz);
  }
  r.verdict = ok ? Verdict::pass : Verdict::fail;
  r.detail = "mean score per iteration " + detail;
  return r;
}

CriterionResult check_baselines(const ExperimentConfig& c, const std::vector<LoadedRun>& runs) {
  CriterionResult r{"baseline broadcast counts", Verdict::skipped, ""};
  const bool zt = has_policy(c, PolicyKind::zero_threshold);
  const bool rg = has_policy(c, PolicyKind::randomized_gossip) && !c.enforce_B2;
  if ((!zt && !rg) || c.K < 1) {
    r.detail = "needs zt or rg runs";
    return r;
  }
  bool ok = true;
  std::string detail;
  for (const auto& run : runs) {
    double total = 0;
    for (int b : run.trace.broadcasts) total += b;
    const double trials = static_cast<double>(c.m) * static_cast<double>(c.K);
    if (run.policy == PolicyKind::zero_threshold) {
      ok = ok && total == trials;
      detail += fmt::format("{}zt seed {}: {} of {}", detail.empty() ? "" : "; ", run.seed, total,
                            trials);
    } else if (run.policy == PolicyKind::randomized_gossip && rg) {
      const double p = c.rg_prob > 0 ? c.rg_prob : 1.0 / c.m;
      const double sd = std::sqrt(trials * p * (1 - p));
      ok = ok && std::abs(total - trials * p) <= 3 * sd;
      detail += fmt::format("{}rg seed {}: {} vs expected {:.1f} +- {:.1f}",
                            detail.empty() ? "" : "; ", run.seed, total, trials * p, 3 * sd);
    }
  }
  r.verdict = ok ? Verdict::pass : Verdict::fail;
  r.detail = detail;
  return r;
}

}  // namespace

VerifyReport verify_suite(const std::string& dir_name) {
  const fs::path dir(dir_name);
  if (!fs::is_directory(dir)) throw InvalidArgument(fmt::format("{} is not a directory", dir_name));
  std::vector<std::string> missing;
  if (!fs::exists(dir / kConfigFile)) missing.push_back((dir / kConfigFile).string());
  if (!fs::exists(dir / kSummaryFile)) missing.push_back((dir / kSummaryFile).string());
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += "\n  " + m;
    throw InvalidArgument("missing artifacts:" + list);
  }
  const auto config = load_config((dir / kConfigFile).string());
  for (auto p : config.policies) {
    for (auto s : config.seeds) {
      const auto run = dir / run_dir_name(p, s);
      for (const char* f : {kTraceFile, kInfoFlowFile, kConfigFile}) {
        if (!fs::exists(run / f)) missing.push_back((run / f).string());
      }
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += "\n  " + m;
    throw InvalidArgument("missing artifacts:" + list);
  }
  if (fs::exists(dir / kPartialMarker)) {
    throw InvalidArgument(fmt::format("{} holds a partial suite", dir_name));
  }

  std::vector<LoadedRun> runs;
  for (auto p : config.policies) {
    for (auto s : config.seeds) {
      const auto run = dir / run_dir_name(p, s);
      runs.push_back({p, s, run, read_trace_file((run / kTraceFile).string())});
    }
  }

  VerifyReport report;
  report.criteria.push_back(check_connectivity(config, runs));
  report.criteria.push_back(check_rate(config, runs));
  report.criteria.push_back(check_plateau(config, runs));
  report.criteria.push_back(check_tradeoff(config, runs, dir));
  report.criteria.push_back(check_score(config, runs));
  report.criteria.push_back(check_baselines(config, runs));
  return report;
}

void write_report(std::ostream& out, const VerifyReport& report) {
  for (const auto& c : report.criteria) {
    out << fmt::format("{:<8} {}: {}\n", verdict_name(c.verdict), c.name, c.detail);
  }
}

}  // namespace efhc
