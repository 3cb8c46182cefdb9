#pragma once

#include "reachguard/numerics.hpp"

#include <json.hpp>

#include <istream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace reachguard {

class MonitorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Verdict { Normal, Alarm };

struct CheckResult {
  Verdict verdict = Verdict::Normal;
  double t_first = 0.0;  // first sample time of the current violation streak (Alarm only)
  double qform = 0.0;    // u^T R u
  bool rejected = false; // non-finite sample, ignored
};

struct AlarmRecord {
  double t = 0.0;  // first sample of the streak that raised the alarm
  Vector u;        // sample that reached the debounce threshold
  double qform = 0.0;
};

/// Runtime check u(t) in E(R). Needs nothing but the input bound.
class MonitorState {
 public:
  explicit MonitorState(Ellipsoid bound, int debounce_required = 1, double tol = 1e-9);

  CheckResult check(double t, const Vector& u);

  const Ellipsoid& bound() const { return bound_; }
  int debounce_required() const { return debounce_; }
  int consecutive_violations() const { return streak_; }
  std::size_t samples_seen() const { return seen_; }
  std::size_t rejected() const { return rejected_; }
  const std::vector<AlarmRecord>& alarms() const { return alarms_; }

 private:
  Ellipsoid bound_;
  int debounce_;
  double tol_;
  int streak_ = 0;
  double streak_start_ = 0.0;
  std::size_t seen_ = 0;
  std::size_t rejected_ = 0;
  std::vector<AlarmRecord> alarms_;
};

struct AlarmInterval {
  double t_first = 0.0;  // first sample of the violating streak
  double t_last = 0.0;   // last violating sample
  double max_qform = 0.0;
};

struct AlarmReport {
  std::vector<AlarmInterval> alarms;
  std::size_t samples = 0;   // accepted samples
  std::size_t rejected = 0;  // non-finite samples
};

using Sample = std::pair<double, Vector>;

/// Offline re-analysis; throws MonitorError on decreasing timestamps (with position).
AlarmReport replay(const Ellipsoid& bound, const std::vector<Sample>& samples,
                   int debounce_required = 1, double tol = 1e-9);

nlohmann::json to_json(const AlarmReport& report);

/// Reads `t,u1..um` records. A header naming columns `t` and `u1..um` (as in
/// simulation CSVs) selects those columns; '#' lines are comments.
/// Unparseable numbers (nan, inf) become non-finite samples.
std::vector<Sample> read_samples(std::istream& in, Eigen::Index m);

}  // namespace reachguard
