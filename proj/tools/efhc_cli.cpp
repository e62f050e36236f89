#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "efhc/config.hpp"
#include "efhc/error.hpp"
#include "efhc/suite.hpp"
#include "efhc/topology.hpp"

namespace {

enum Exit { kOk = 0, kValidation = 1, kRuntime = 2, kAcceptanceFail = 3 };

int cmd_run(const std::string& config_path, const std::string& out_override) {
  const auto config = efhc::load_config(config_path);
  const std::string out = out_override.empty() ? config.out_dir : out_override;
  try {
    efhc::run_suite(config, out, std::cerr);
  } catch (const efhc::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\npartial results left in " << out << "\n";
    return kRuntime;
  }
  std::cout << out << "\n";
  return kOk;
}

int cmd_verify(const std::string& dir) {
  const auto report = efhc::verify_suite(dir);
  efhc::write_report(std::cout, report);
  return report.any_failed() ? kAcceptanceFail : kOk;
}

int cmd_certify(const std::string& path, int B) {
  const auto log = efhc::read_info_flow_file(path);
  const auto report = efhc::certify_B_connectivity(log, B);
  std::cout << fmt::format("B = {}: {} windows checked, {} violations\n", B,
                           report.windows_checked, report.violations.size());
  for (auto k : report.violations) std::cout << "  window starting at k = " << k << "\n";
  return report.certified() ? kOk : kAcceptanceFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-triggered decentralized learning simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, dir, template_name, infoflow;
  int B = 0;

  auto* run = app.add_subcommand("run", "Run every (policy, seed) pair of a config");
  run->add_option("config", config_path, "key = value config file")->required();
  run->add_option("--out", out_dir, "artifact directory (overrides out_dir)");

  auto* verify = app.add_subcommand("verify", "Check a finished suite directory");
  verify->add_option("dir", dir, "suite directory")->required();

  auto* gen = app.add_subcommand("gen-config", "Print a documented config template");
  gen->add_option("--template", template_name, "minimal, diminishing, constant_step, tradeoff, "
                                               "connectivity or fmnist")
      ->default_val("minimal");

  auto* certify = app.add_subcommand("certify", "Certify B-connectivity of an info-flow log");
  certify->add_option("infoflow", infoflow, "info-flow log")->required();
  certify->add_option("--B", B, "window length")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir);
    if (*verify) return cmd_verify(dir);
    if (*gen) {
      std::cout << efhc::config_template(template_name);
      return kOk;
    }
    if (*certify) return cmd_certify(infoflow, B);
  } catch (const efhc::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const efhc::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
