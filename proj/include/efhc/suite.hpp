#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "efhc/config.hpp"
#include "efhc/engine.hpp"

namespace efhc {

// Datasets read from disk once per suite and shared by every run.
struct SuiteData {
  std::shared_ptr<const SampleSet> train;
  std::shared_ptr<const SampleSet> test;
};

SuiteData load_suite_data(const ExperimentConfig& config);

// Tasks, topology and bandwidths for one (policy, seed) run. The topology,
// data split and bandwidths depend only on the seed, so every policy sees
// the same network and data for a given seed.
SimulationSetup build_setup(const ExperimentConfig& config, PolicyKind policy,
                            std::uint64_t seed, const SuiteData& data);

std::string run_dir_name(PolicyKind policy, std::uint64_t seed);

inline constexpr const char* kTraceFile = "trace.csv";
inline constexpr const char* kInfoFlowFile = "infoflow.txt";
inline constexpr const char* kConfigFile = "config.txt";
inline constexpr const char* kSummaryFile = "summary.csv";
inline constexpr const char* kPartialMarker = "PARTIAL";

// Runs every (policy, seed) pair into `out_dir`, then writes config.txt and
// summary.csv at the top. On failure a PARTIAL marker is left behind and the
// exception propagates.
void run_suite(const ExperimentConfig& config, const std::string& out_dir, std::ostream& log);

enum class Verdict { pass, fail, skipped };

struct CriterionResult {
  std::string name;
  Verdict verdict = Verdict::skipped;
  std::string detail;
};

struct VerifyReport {
  std::vector<CriterionResult> criteria;
  bool any_failed() const;
};

std::string verdict_name(Verdict v);

// Checks a finished suite directory; throws InvalidArgument listing missing
// files when artifacts are absent.
VerifyReport verify_suite(const std::string& dir);
void write_report(std::ostream& out, const VerifyReport& report);

}  // namespace efhc
