#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace reachguard::cli {

enum ExitCode : int { kOk = 0, kError = 1, kInfeasible = 2, kAlarms = 3 };

const char* version();

struct SynthesizeConfig {
  std::string model_path;
  std::string alpha_grid = "1e-2:1e3:20";  // "lo:hi:count" or "a,b,c"
  std::string objective = "logdet";        // or "trace" (lower fidelity)
  double eps_pd = 1e-8;
  double cap = 1e12;
  unsigned threads = 0;
  std::string out_path = "synthesis.json";
};

struct SimulateConfig {
  std::string model_path;
  std::string artifact_path;  // required unless no_monitor
  bool no_monitor = false;
  std::string scenario = "paperlike";  // paperlike | zero | constant
  double dt = 0.01;
  double t_end = 500.0;
  std::uint64_t seed = 1;
  double init_scale = 0.0;  // uniform random initial states in [-s, s]
  int debounce = 1;
  std::string out_dir = ".";
};

struct MonitorConfig {
  std::string artifact_path;
  std::string model_path;  // optional: enables the stale-artifact guard
  std::string input_path = "-";
  int debounce = 1;
  double tol = 1e-9;
  std::string out_path;  // report to stdout when empty
};

struct ValidateConfig {
  std::string model_path;
  std::string artifact_path;  // optional: re-check stored certificates
};

int cmd_synthesize(const SynthesizeConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_monitor(const MonitorConfig& cfg, std::istream& in, std::ostream& out, std::ostream& err);
int cmd_validate(const ValidateConfig& cfg, std::ostream& out, std::ostream& err);

/// Full command line front end: `reachguard synthesize|simulate|monitor|validate ...`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace reachguard::cli
