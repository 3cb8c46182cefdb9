#include "reachguard/cli.hpp"

#include "reachguard/io.hpp"
#include "reachguard/monitor.hpp"
#include "reachguard/sim.hpp"
#include "reachguard/synthesis.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#ifndef REACHGUARD_VERSION
#define REACHGUARD_VERSION "0.0.0"
#endif

namespace reachguard::cli {

using nlohmann::json;

const char* version() { return REACHGUARD_VERSION; }

namespace {

std::string short_hash(const json& j) { return sha256_hex(j.dump()).substr(0, 16); }

struct LoadedModel {
  SystemModel model;
  ClosedLoop cl;
  std::string hash;
};

LoadedModel load_checked(const std::string& path) {
  SystemModel model = load_model(path);
  ClosedLoop cl = assemble_closed_loop(model.plant, model.controller, model.detector, model.attack);
  std::string hash = model_hash(model);
  return {std::move(model), std::move(cl), std::move(hash)};
}

SynthesisResult load_artifact(const std::string& path) {
  if (path.empty()) throw std::runtime_error("no synthesis artifact given (use --artifact or --no-monitor)");
  return synthesis_from_json(load_json(path));
}

// Refuses a bound that was synthesized for a different model.
bool hash_matches(const SynthesisResult& art, const std::string& model_hash, std::ostream& err) {
  if (art.model_hash == model_hash) return true;
  err << "error: artifact was synthesized for a different model (stale bound)\n"
      << "  artifact model hash: " << art.model_hash << "\n"
      << "  current model hash:  " << model_hash << "\n";
  return false;
}

int report_exception(const std::exception& e, std::ostream& err) {
  if (const auto* me = dynamic_cast<const ModelError*>(&e)) {
    err << "error: model validation failed (" << to_string(me->kind()) << "): " << me->what() << "\n";
  } else {
    err << "error: " << e.what() << "\n";
  }
  return kError;
}

void write_projection(const std::filesystem::path& file, const Ellipsoid& e, const std::string& xname,
                      const std::string& yname, const std::string& meta) {
  std::ostringstream os;
  os << "# " << meta << "\n" << xname << ',' << yname << "\n";
  char buf[64];
  for (const auto& p : boundary_points_2d(e, 400)) {
    std::snprintf(buf, sizeof buf, "%.17e,%.17e\n", p.x(), p.y());
    os << buf;
  }
  write_text(file.string(), os.str());
}

// Portable uniform draw in [-1, 1] (std distributions are implementation-defined).
double uniform_pm1(std::mt19937_64& rng) {
  return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
}

}  // namespace

int cmd_synthesize(const SynthesizeConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const auto lm = load_checked(cfg.model_path);
    const auto grid = parse_alpha_grid(cfg.alpha_grid);
    SynthesisOptions opts;
    opts.lmi.eps_pd = cfg.eps_pd;
    opts.lmi.cap = cfg.cap;
    opts.lmi.objective = objective_mode_from_string(cfg.objective);
    opts.threads = cfg.threads;
    const BarrierSolver solver(opts.solver);
    const Ellipsoid stealth(lm.model.detector.Pi);

    SynthesisResult result;
    try {
      result = run_algorithm1(lm.cl, stealth, lm.model.safe, grid, solver, opts);
    } catch (const SynthesisError& e) {
      err << "synthesis failed at stage " << e.what() << "\n";
      return e.kind() == SynthesisError::Kind::NumericalTrouble ? kError : kInfeasible;
    }
    result.model_hash = lm.hash;

    const json config = {{"command", "synthesize"}, {"alpha_grid", cfg.alpha_grid},
                         {"objective", cfg.objective}, {"eps_pd", cfg.eps_pd}, {"cap", cfg.cap}};
    json art = to_json(result);
    art["tool"] = {{"name", "reachguard"}, {"version", version()}};
    art["config_hash"] = short_hash(config);
    write_text(cfg.out_path, art.dump(2) + "\n");

    out << "alpha grid: " << grid.size() << " point(s), "
        << std::count_if(result.profile.begin(), result.profile.end(),
                         [](const SweepEntry& p) { return p.status == SolveStatus::Optimal; })
        << " feasible\n";
    out << "alpha used: " << result.alpha_used << "\n";
    out << "log det Q: " << result.logdet_Q << "\n";
    out << "log det R: " << result.logdet_R << "\n";
    for (const auto& m : result.margins) out << "margin " << m.name << ": " << m.min_eig << "\n";
    if (result.objective == ObjectiveMode::Trace) {
      out << "warning: trace objective is a lower-fidelity surrogate for volume\n";
    }
    if (result.cap_active_Q) out << "warning: Q reached the cap " << cfg.cap << "\n";
    if (result.cap_active_R) out << "warning: R reached the cap " << cfg.cap << "\n";
    out << "artifact: " << cfg.out_path << "\n";
    return kOk;
  } catch (const std::exception& e) {
    return report_exception(e, err);
  }
}

int cmd_simulate(const SimulateConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const auto lm = load_checked(cfg.model_path);
    const SystemModel& model = lm.model;
    std::optional<SynthesisResult> art;
    if (!cfg.no_monitor || !cfg.artifact_path.empty()) {
      art = load_artifact(cfg.artifact_path);
      if (!hash_matches(*art, lm.hash, err)) return kError;
    }

    SimInit init = SimInit::zero(model);
    if (cfg.init_scale > 0.0) {
      std::mt19937_64 rng(cfg.seed);
      for (Vector* v : {&init.x_p, &init.x_c, &init.x_hat}) {
        for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = cfg.init_scale * uniform_pm1(rng);
      }
    }

    const Matrix& pi = model.detector.Pi;
    AttackScenario scenario;
    if (cfg.scenario == "paperlike") {
      const Vector d = art ? resonant_direction(lm.cl, art->R, pi, kPaperlikeFrequencyHz)
                           : worst_case_direction(lm.cl, pi);
      scenario = scenario_paperlike(d, pi);
    } else if (cfg.scenario == "constant") {
      scenario = AttackScenario({{10.0, 110.0, constant_residual(worst_case_direction(lm.cl, pi), 0.99, pi)}});
    } else if (cfg.scenario != "zero") {
      throw std::invalid_argument("unknown scenario '" + cfg.scenario + "' (paperlike, constant, zero)");
    }

    SimOptions opts;
    opts.dt = cfg.dt;
    opts.t_end = cfg.t_end;
    opts.debounce = cfg.debounce;
    if (art && !cfg.no_monitor) opts.monitor_bound = Ellipsoid(art->R);
    const SimTrace tr = simulate(model, scenario, init, opts);

    const json config = {{"command", "simulate"}, {"scenario", cfg.scenario}, {"dt", cfg.dt},
                         {"t_end", cfg.t_end}, {"seed", cfg.seed}, {"init_scale", cfg.init_scale},
                         {"debounce", cfg.debounce}, {"monitor", static_cast<bool>(opts.monitor_bound)},
                         {"artifact_hash", art ? sha256_hex(to_json(*art).dump()) : std::string()}};
    const std::string meta = std::string("reachguard ") + version() + " config=" + short_hash(config) +
                             " model=" + lm.hash.substr(0, 16);

    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    write_csv(csv, tr, meta + " scenario=" + cfg.scenario);
    write_text((dir / "trace.csv").string(), csv.str());

    const Eigen::Index np = model.plant.states();
    const Ellipsoid safe(model.safe.Psi_p, model.safe.psi_bar_p);
    for (Eigen::Index i = 0; i < np; ++i) {
      for (Eigen::Index j = i + 1; j < np; ++j) {
        const std::string a = "xp" + std::to_string(i + 1), b = "xp" + std::to_string(j + 1);
        try {
          write_projection(dir / ("safe_" + a + "_" + b + ".csv"), project_ellipsoid(safe, {i, j}), a, b, meta);
        } catch (const NumericalError&) {
          err << "note: safe set is unbounded in (" << a << ", " << b << "); projection skipped\n";
        }
        if (art) {
          write_projection(dir / ("ezeta_" + a + "_" + b + ".csv"),
                           project_ellipsoid(Ellipsoid(art->Q), {i, j}), a, b, meta);
        }
      }
    }
    if (art) {
      const Eigen::Index m = art->R.rows();
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
          const std::string a = "u" + std::to_string(i + 1), b = "u" + std::to_string(j + 1);
          const std::string name = m == 2 ? "eu.csv" : "eu_" + a + "_" + b + ".csv";
          write_projection(dir / name, project_ellipsoid(Ellipsoid(art->R), {i, j}), a, b, meta);
        }
      }
    }

    const auto count = [](const std::vector<bool>& v, bool value) {
      return std::count(v.begin(), v.end(), value);
    };
    out << "samples: " << tr.size() << " (dt " << tr.dt << " s)\n";
    out << "unsafe samples: " << count(tr.safety_ok, false) << "\n";
    out << "non-stealthy samples: " << count(tr.stealthy_ok, false) << "\n";
    out << "alarm samples: " << count(tr.detect_alarm, true) << "\n";
    out << "trace: " << (dir / "trace.csv").string() << "\n";
    if (tr.aborted) {
      err << "error: " << tr.abort_reason << " (partial trace written)\n";
      return kError;
    }
    return kOk;
  } catch (const std::exception& e) {
    return report_exception(e, err);
  }
}

int cmd_monitor(const MonitorConfig& cfg, std::istream& in, std::ostream& out, std::ostream& err) {
  try {
    const SynthesisResult art = load_artifact(cfg.artifact_path);
    if (!cfg.model_path.empty()) {
      const auto lm = load_checked(cfg.model_path);
      if (!hash_matches(art, lm.hash, err)) return kError;
    }
    std::vector<Sample> samples;
    if (cfg.input_path.empty() || cfg.input_path == "-") {
      samples = read_samples(in, art.R.rows());
    } else {
      std::ifstream file(cfg.input_path);
      if (!file) throw std::runtime_error("cannot open " + cfg.input_path);
      samples = read_samples(file, art.R.rows());
    }
    const AlarmReport rep = replay(Ellipsoid(art.R), samples, cfg.debounce, cfg.tol);
    const std::string text = to_json(rep).dump(2) + "\n";
    if (cfg.out_path.empty()) {
      out << text;
    } else {
      write_text(cfg.out_path, text);
      out << "alarms: " << rep.alarms.size() << "\n";
    }
    return rep.alarms.empty() ? kOk : kAlarms;
  } catch (const std::exception& e) {
    return report_exception(e, err);
  }
}

int cmd_validate(const ValidateConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const SystemModel model = load_model(cfg.model_path);
    const AssumptionReport rep = validate_assumptions(model.plant, model.controller, model.detector);
    auto line = [&](const char* name, const AssumptionReport::Item& item) {
      out << (item.pass ? "PASS " : "FAIL ") << name << ": " << item.detail << "\n";
    };
    line("well-posed", rep.well_posed);
    line("closed-loop stable", rep.closed_loop_stable);
    line("observable", rep.observable);
    line("observer stable", rep.observer_stable);
    bool ok = rep.all_pass();
    if (!ok) return kError;

    const ClosedLoop cl = assemble_closed_loop(model.plant, model.controller, model.detector, model.attack);
    out << "PASS extended loop: n = " << cl.dims.n << ", spectral abscissa " << cl.spectral_abscissa << "\n";

    if (!cfg.artifact_path.empty()) {
      const SynthesisResult art = load_artifact(cfg.artifact_path);
      if (!hash_matches(art, model_hash(model), err)) return kError;
      const Ellipsoid stealth(model.detector.Pi);
      const LmiProblem p1 = build_lemma1(cl, stealth, model.safe, art.alpha_used);
      const LmiProblem p2 = build_theorem1(cl, stealth, art.Q);
      Assignment a1{{"Q", art.Q},
                    {"beta", Matrix::Constant(1, 1, art.beta)},
                    {"lambda", Matrix::Constant(1, 1, art.lambda)}};
      Assignment a2{{"R", art.R},
                    {"gamma", Matrix::Constant(1, 1, art.gamma)},
                    {"tau", Matrix::Constant(1, 1, art.tau)}};
      for (const auto& [prefix, margins] :
           {std::pair{"op1.", certificate_margin(p1, a1)}, std::pair{"op2.", certificate_margin(p2, a2)}}) {
        for (const auto& m : margins) {
          const bool pass = m.min_eig >= -1e-6;
          ok = ok && pass;
          out << (pass ? "PASS " : "FAIL ") << "certificate " << prefix << m.name << ": min eig "
              << m.min_eig << "\n";
        }
      }
    }
    return ok ? kOk : kError;
  } catch (const std::exception& e) {
    return report_exception(e, err);
  }
}

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reachable-set synthesis and input monitoring for stealthy sensor attacks", "reachguard"};
  app.set_version_flag("--version", std::string("reachguard ") + version());
  app.require_subcommand(1);

  SynthesizeConfig syn;
  auto* s = app.add_subcommand("synthesize", "Solve the state and input bound problems");
  s->add_option("-m,--model", syn.model_path, "Model JSON file")->required();
  std::string single_alpha;
  auto* alpha_opt = s->add_option("--alpha", single_alpha, "Single alpha value");
  s->add_option("--alpha-grid", syn.alpha_grid, "lo:hi:count (log-spaced) or a,b,c")
      ->capture_default_str()
      ->excludes(alpha_opt);
  s->add_option("--objective", syn.objective, "logdet or trace")
      ->check(CLI::IsMember({"logdet", "trace"}))
      ->capture_default_str();
  s->add_option("--eps", syn.eps_pd, "Strict-definiteness floor")->capture_default_str();
  s->add_option("--cap", syn.cap, "Upper cap on Q and R")->capture_default_str();
  s->add_option("--threads", syn.threads, "Sweep threads (0 = hardware)")->capture_default_str();
  s->add_option("-o,--out", syn.out_path, "Artifact path")->capture_default_str();

  SimulateConfig sim;
  auto* si = app.add_subcommand("simulate", "Simulate the attacked loop and write plot data");
  si->add_option("-m,--model", sim.model_path, "Model JSON file")->required();
  si->add_option("-a,--artifact", sim.artifact_path, "Synthesis artifact");
  si->add_flag("--no-monitor", sim.no_monitor, "Run without the input monitor");
  si->add_option("--scenario", sim.scenario, "paperlike, constant or zero")
      ->check(CLI::IsMember({"paperlike", "constant", "zero"}))
      ->capture_default_str();
  si->add_option("--dt", sim.dt, "Step size [s]")->capture_default_str();
  si->add_option("--t-end", sim.t_end, "Horizon [s]")->capture_default_str();
  si->add_option("--seed", sim.seed, "Seed for random initial states")->capture_default_str();
  si->add_option("--init-scale", sim.init_scale, "Random initial states in [-s, s]")->capture_default_str();
  si->add_option("--debounce", sim.debounce, "Consecutive violations before an alarm")->capture_default_str();
  si->add_option("-o,--out-dir", sim.out_dir, "Output directory")->capture_default_str();

  MonitorConfig mon;
  auto* mo = app.add_subcommand("monitor", "Check logged inputs against the input bound");
  mo->add_option("-a,--artifact", mon.artifact_path, "Synthesis artifact")->required();
  mo->add_option("-m,--model", mon.model_path, "Model JSON file (enables the stale-bound guard)");
  mo->add_option("-i,--input", mon.input_path, "CSV of t,u1..um ('-' for stdin)")->capture_default_str();
  mo->add_option("--debounce", mon.debounce, "Consecutive violations before an alarm")->capture_default_str();
  mo->add_option("--tol", mon.tol, "Membership tolerance")->capture_default_str();
  mo->add_option("-o,--out", mon.out_path, "Report path (stdout if omitted)");

  ValidateConfig val;
  auto* va = app.add_subcommand("validate", "Check model assumptions and stored certificates");
  va->add_option("-m,--model", val.model_path, "Model JSON file")->required();
  va->add_option("-a,--artifact", val.artifact_path, "Synthesis artifact to re-verify");

  std::vector<const char*> argv{"reachguard"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kError;
  }

  if (s->parsed()) {
    if (!single_alpha.empty()) syn.alpha_grid = single_alpha;
    return cmd_synthesize(syn, out, err);
  }
  if (si->parsed()) return cmd_simulate(sim, out, err);
  if (mo->parsed()) return cmd_monitor(mon, in, out, err);
  return cmd_validate(val, out, err);
}

}  // namespace reachguard::cli
