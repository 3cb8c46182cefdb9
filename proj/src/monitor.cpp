#include "reachguard/monitor.hpp"

#include <cmath>
#include <sstream>

namespace reachguard {

MonitorState::MonitorState(Ellipsoid bound, int debounce_required, double tol)
    : bound_(std::move(bound)), debounce_(debounce_required), tol_(tol) {
  if (debounce_ < 1) throw std::invalid_argument("monitor: debounce must be >= 1");
  if (!(tol_ >= 0.0)) throw std::invalid_argument("monitor: tolerance must be >= 0");
}

CheckResult MonitorState::check(double t, const Vector& u) {
  if (u.size() != bound_.dim()) throw DimensionError("monitor: sample has wrong dimension");
  CheckResult res;
  if (!std::isfinite(t) || !u.allFinite()) {
    ++rejected_;
    res.rejected = true;
    return res;
  }
  ++seen_;
  res.qform = bound_.quadratic_form(u);
  if (res.qform > 1.0 + tol_) {
    if (streak_ == 0) streak_start_ = t;
    ++streak_;
    if (streak_ >= debounce_) {
      res.verdict = Verdict::Alarm;
      res.t_first = streak_start_;
      if (streak_ == debounce_) alarms_.push_back({streak_start_, u, res.qform});
    }
  } else {
    streak_ = 0;
  }
  return res;
}

AlarmReport replay(const Ellipsoid& bound, const std::vector<Sample>& samples,
                   int debounce_required, double tol) {
  MonitorState state(bound, debounce_required, tol);
  AlarmReport rep;
  bool open = false;
  double last_t = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& [t, u] = samples[i];
    if (std::isfinite(t)) {
      if (t < last_t) {
        std::ostringstream msg;
        msg << "out-of-order timestamp at sample " << i << " (t=" << t << " after " << last_t << ")";
        throw MonitorError(msg.str());
      }
      last_t = t;
    }
    const auto res = state.check(t, u);
    if (res.rejected) continue;
    if (res.verdict == Verdict::Alarm) {
      if (!open) {
        rep.alarms.push_back({res.t_first, t, res.qform});
        open = true;
      }
      auto& cur = rep.alarms.back();
      cur.t_last = t;
      cur.max_qform = std::max(cur.max_qform, res.qform);
    } else if (state.consecutive_violations() == 0) {
      open = false;
    }
  }
  rep.samples = state.samples_seen();
  rep.rejected = state.rejected();
  return rep;
}

nlohmann::json to_json(const AlarmReport& report) {
  nlohmann::json alarms = nlohmann::json::array();
  for (const auto& a : report.alarms) {
    alarms.push_back({{"t_first", a.t_first}, {"t_last", a.t_last}, {"max_qform", a.max_qform}});
  }
  return {{"alarms", alarms}, {"samples", report.samples}, {"rejected", report.rejected}};
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) {
    const auto a = cell.find_first_not_of(" \t\r");
    const auto b = cell.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? std::string() : cell.substr(a, b - a + 1));
  }
  return out;
}

double parse_number(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) return std::numeric_limits<double>::quiet_NaN();
  return v;
}

bool looks_numeric(const std::string& s) {
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return !s.empty() && end == s.c_str() + s.size();
}

}  // namespace

std::vector<Sample> read_samples(std::istream& in, Eigen::Index m) {
  std::vector<Eigen::Index> cols;  // column of t, then u1..um
  for (Eigen::Index i = 0; i <= m; ++i) cols.push_back(i);
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  bool first_data = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (first_data && !looks_numeric(cells[0])) {
      // header row
      first_data = false;
      std::vector<Eigen::Index> found(static_cast<size_t>(m + 1), -1);
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c] == "t") found[0] = static_cast<Eigen::Index>(c);
        for (Eigen::Index k = 1; k <= m; ++k) {
          if (cells[c] == "u" + std::to_string(k)) found[static_cast<size_t>(k)] = static_cast<Eigen::Index>(c);
        }
      }
      for (Eigen::Index k = 0; k <= m; ++k) {
        if (found[static_cast<size_t>(k)] < 0) {
          throw MonitorError("header lacks column " + (k == 0 ? std::string("t") : "u" + std::to_string(k)));
        }
      }
      cols = found;
      continue;
    }
    first_data = false;
    Vector u(m);
    double t = std::numeric_limits<double>::quiet_NaN();
    for (Eigen::Index k = 0; k <= m; ++k) {
      const auto c = static_cast<size_t>(cols[static_cast<size_t>(k)]);
      if (c >= cells.size()) {
        throw MonitorError("line " + std::to_string(lineno) + ": expected at least " +
                           std::to_string(c + 1) + " fields");
      }
      const double v = parse_number(cells[c]);
      if (k == 0) {
        t = v;
      } else {
        u(k - 1) = v;
      }
    }
    out.emplace_back(t, std::move(u));
  }
  return out;
}

}  // namespace reachguard
