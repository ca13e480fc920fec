// delaycomp: synthesis, certification and simulation of finite-dimensional
// input-delay compensators from a JSON run specification.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "delaycomp/io.hpp"
#include "delaycomp/simulate.hpp"

#ifndef DELAYCOMP_SPEC_DIR
#define DELAYCOMP_SPEC_DIR "specs"
#endif

namespace fs = std::filesystem;
using namespace delaycomp;

namespace {

enum Exit { kOk = 0, kValidation = 2, kNotFound = 3, kNumerical = 4 };

struct Options {
  std::string spec;
  std::string out = ".";
  std::string cert;
  int n = 0;
  int l_max = 0;
  double dt = 0.0;
  int example = 0;
};

int thread_budget() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("DELAYCOMP_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) hw = std::min(hw, cap);
  }
  return hw;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string fmt(const Matrix& m) {
  std::ostringstream os;
  os << '[';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (r) os << "; ";
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? ", " : "") << fmt(m(r, c));
  }
  os << ']';
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SpecError("cannot write " + path.string());
  out << text;
}

fs::path output_dir(const Options& opt) {
  fs::path dir(opt.out);
  fs::create_directories(dir);
  return dir;
}

RunSpec load(const Options& opt) {
  if (!opt.spec.empty()) return load_run_spec(opt.spec);
  if (opt.example >= 1 && opt.example <= 3) {
    return load_run_spec((fs::path(DELAYCOMP_SPEC_DIR) / ("example" + std::to_string(opt.example) + ".json")).string());
  }
  throw SpecError("give --spec <file> (or --example 1|2|3 for reproduce)");
}

int order(const RunSpec& spec, const Options& opt) { return opt.n ? opt.n : spec.N; }

SimConfig sim_config(const RunSpec& spec, const Options& opt) {
  SimConfig cfg = spec.sim_config();
  if (opt.dt > 0.0) cfg.dt = opt.dt;
  return cfg;
}

void print_controller(const DynamicController& c) {
  std::cout << "N = " << c.order() << ", D = " << c.cfg.D << '\n'
            << "K      = " << fmt(c.K) << '\n'
            << "K1     = " << fmt(c.K1) << '\n'
            << "K2     = " << fmt(c.K2) << '\n'
            << "Atilde = " << fmt(c.Atilde) << '\n'
            << "Btilde = " << fmt(c.Btilde) << '\n'
            << "H      = " << (c.H ? fmt(*c.H) : std::string("none")) << '\n';
}

int cmd_synth(const Options& opt) {
  const RunSpec spec = load(opt);
  const int N = order(spec, opt);
  const DynamicController ctrl = build_controller(spec, N);
  const fs::path path = output_dir(opt) / ("controller_N" + std::to_string(N) + ".json");
  write_file(path, controller_to_json(ctrl));
  print_controller(ctrl);
  std::cout << "wrote " << path.string() << '\n';
  return kOk;
}

// Certifies one N; returns the certificate if any and prints the per-l report.
std::optional<Certificate> certify(const RunSpec& spec, const DynamicController& ctrl,
                                   const Options& opt, const fs::path& dir) {
  const int N = ctrl.order();
  MinLReport report;
  if (spec.l && opt.l_max == 0) {
    LSweepEntry entry;
    entry.l = *spec.l;
    const FeasibilityResult res = solve_feasibility(assemble_blocks(spec.plant, ctrl, *spec.l));
    if (const auto* c = std::get_if<Certificate>(&res)) {
      entry.status = LSweepEntry::Status::Certified;
      entry.certificate = *c;
      entry.margin = c->solver_margin;
      report.min_feasible_l = entry.l;
    } else {
      entry.margin = std::get<NotFound>(res).best_margin;
      entry.message = std::get<NotFound>(res).reason;
    }
    report.entries.push_back(entry);
  } else {
    const int l_max = opt.l_max ? opt.l_max : spec.l_max;
    report = find_min_l(spec.plant, ctrl, l_max, SolverOptions{}, thread_budget());
  }
  write_file(dir / ("report_N" + std::to_string(N) + ".json"), min_l_report_to_json(report, N));
  for (const auto& e : report.entries) {
    const char* verdict = e.status == LSweepEntry::Status::Certified  ? "certified"
                          : e.status == LSweepEntry::Status::NotFound ? "no certificate"
                                                                      : "error";
    std::cout << "N = " << N << "  l = " << e.l << "  " << verdict << "  margin " << e.margin
              << (e.message.empty() ? "" : "  (" + e.message + ")") << '\n';
  }
  if (!report.min_feasible_l) return std::nullopt;
  const auto& entry = report.entries[static_cast<std::size_t>(
      std::find_if(report.entries.begin(), report.entries.end(),
                   [&](const LSweepEntry& e) { return e.l == *report.min_feasible_l; }) -
      report.entries.begin())];
  const Certificate& cert = *entry.certificate;
  write_file(dir / ("certificate_N" + std::to_string(N) + "_l" + std::to_string(cert.l) + ".json"),
             certificate_to_json(cert));
  std::cout << "certificate at l = " << cert.l << ": min eig P " << cert.margins.min_eig_P
            << ", max eig Lambda " << cert.margins.max_eig_Lambda << '\n';
  return cert;
}

int cmd_certify(const Options& opt) {
  const RunSpec spec = load(opt);
  const DynamicController ctrl = build_controller(spec, order(spec, opt));
  return certify(spec, ctrl, opt, output_dir(opt)) ? kOk : kNotFound;
}

struct SimOutcome {
  Trajectory traj;
  std::optional<Trajectory> ideal;
  std::optional<DeviationMetrics> metrics;
};

SimOutcome run_simulation(const RunSpec& spec, const DynamicController& ctrl, const Options& opt,
                          const fs::path& dir, const Certificate* cert) {
  const SimConfig cfg = sim_config(spec, opt);
  SimOutcome out{simulate_closed_loop(spec.plant, ctrl, cfg), std::nullopt, std::nullopt};
  if (spec.sim.ideal) {
    out.ideal = simulate_ideal(spec.plant, ctrl.K, cfg);
    if (!out.traj.diverged() && !out.ideal->diverged()) {
      out.metrics = compare_metrics(out.traj, *out.ideal);
    }
  }
  std::vector<double> V;
  if (cert) {
    const LmiBlocks blocks = assemble_blocks(spec.plant, ctrl, cert->l);
    V = lyapunov_trace(out.traj, *cert, blocks, build_legendre_block(cert->l, spec.plant.D));
  }
  const bool same_grid = out.ideal && out.ideal->size() == out.traj.size();
  std::ofstream csv(dir / ("trajectory_N" + std::to_string(ctrl.order()) + ".csv"), std::ios::binary);
  write_csv(csv, out.traj, same_grid ? &*out.ideal : nullptr, cert ? &V : nullptr);

  std::cout << "N = " << ctrl.order() << "  dt = " << out.traj.dt << "  samples = " << out.traj.size();
  if (out.traj.diverged()) {
    std::cout << "  DIVERGED at t = " << out.traj.divergence->time << " (" << out.traj.divergence->reason
              << ")";
  }
  if (out.metrics) {
    std::cout << "  sup|y - y_ideal| = " << out.metrics->sup << "  int (y - y_ideal)^2 = " << out.metrics->l2;
  }
  std::cout << '\n';
  return out;
}

std::optional<Certificate> load_certificate(const Options& opt) {
  if (opt.cert.empty()) return std::nullopt;
  std::ifstream in(opt.cert);
  if (!in) throw SpecError("cannot open certificate " + opt.cert);
  std::ostringstream ss;
  ss << in.rdbuf();
  return certificate_from_json(ss.str());
}

int cmd_simulate(const Options& opt) {
  const RunSpec spec = load(opt);
  const DynamicController ctrl = build_controller(spec, order(spec, opt));
  const auto cert = load_certificate(opt);
  run_simulation(spec, ctrl, opt, output_dir(opt), cert ? &*cert : nullptr);
  return kOk;
}

int cmd_sweep(const Options& opt) {
  const RunSpec spec = load(opt);
  std::vector<int> orders = spec.sweep_N;
  if (opt.n) orders = {opt.n};
  if (orders.empty()) orders = {spec.N};
  const fs::path dir = output_dir(opt);
  bool all_certified = true;
  for (int N : orders) {
    const DynamicController ctrl = build_controller(spec, N);
    const auto cert = certify(spec, ctrl, opt, dir);
    all_certified = all_certified && cert.has_value();
    run_simulation(spec, ctrl, opt, dir, cert ? &*cert : nullptr);
  }
  return all_certified ? kOk : kNotFound;
}

struct Mismatches {
  std::vector<std::string> items;

  void check(const std::string& what, const Matrix& got, const Matrix& want, double tol) {
    if (got.rows() != want.rows() || got.cols() != want.cols()) {
      items.push_back(what + ": shape " + std::to_string(got.rows()) + "x" + std::to_string(got.cols()) +
                      ", expected " + std::to_string(want.rows()) + "x" + std::to_string(want.cols()));
      return;
    }
    for (Eigen::Index r = 0; r < got.rows(); ++r) {
      for (Eigen::Index c = 0; c < got.cols(); ++c) {
        if (!(std::abs(got(r, c) - want(r, c)) <= tol)) {
          items.push_back(what + "(" + std::to_string(r) + "," + std::to_string(c) + ") = " +
                          fmt(got(r, c)) + ", expected " + fmt(want(r, c)));
        }
      }
    }
  }
};

int cmd_reproduce(const Options& opt) {
  const RunSpec spec = load(opt);
  const fs::path dir = output_dir(opt);
  const ExpectedValues& ex = spec.expected;
  Mismatches bad;

  const DynamicController ctrl = build_controller(spec, spec.N);
  write_file(dir / ("controller_N" + std::to_string(spec.N) + ".json"), controller_to_json(ctrl));
  std::cout << "== " << spec.name << ": synthesis\n";
  print_controller(ctrl);
  if (ex.K) bad.check("K", ctrl.K, *ex.K, ex.tolerance);
  if (ex.K1) bad.check("K1", ctrl.K1, *ex.K1, ex.tolerance);
  if (ex.K2) bad.check("K2", ctrl.K2, *ex.K2, ex.tolerance);
  if (ex.Atilde) bad.check("Atilde", ctrl.Atilde, *ex.Atilde, ex.tolerance);
  if (ex.Btilde) bad.check("Btilde", ctrl.Btilde, *ex.Btilde, ex.tolerance);
  if (ex.H) {
    if (!ctrl.H) bad.items.push_back("H: not defined");
    else bad.check("H", Matrix::Constant(1, 1, *ctrl.H), Matrix::Constant(1, 1, *ex.H), ex.tolerance);
  }
  if (!ex.closed_loop_poles.empty()) {
    const Eigen::VectorXcd eig = Eigen::EigenSolver<Matrix>(spec.plant.A + spec.plant.B * ctrl.K).eigenvalues();
    std::vector<bool> used(static_cast<std::size_t>(eig.size()), false);
    for (const auto& p : ex.closed_loop_poles) {
      bool found = false;
      for (Eigen::Index i = 0; i < eig.size() && !found; ++i) {
        if (!used[static_cast<std::size_t>(i)] && std::abs(eig(i) - p) <= ex.pole_tolerance) {
          used[static_cast<std::size_t>(i)] = found = true;
        }
      }
      if (!found) {
        bad.items.push_back("closed-loop pole " + fmt(p.real()) + (p.imag() >= 0 ? "+" : "") + fmt(p.imag()) +
                            "i not matched within " + std::to_string(ex.pole_tolerance));
      }
    }
  }

  std::cout << "== " << spec.name << ": stability test\n";
  for (const auto& row : ex.table) {
    const DynamicController c = build_controller(spec, row.N);
    const FeasibilityResult res = solve_feasibility(assemble_blocks(spec.plant, c, row.l));
    if (const auto* cert = std::get_if<Certificate>(&res)) {
      write_file(dir / ("certificate_N" + std::to_string(row.N) + "_l" + std::to_string(row.l) + ".json"),
                 certificate_to_json(*cert));
      std::cout << "N = " << row.N << "  l = " << row.l << "  certified (margin " << cert->solver_margin
                << ", max eig Lambda " << cert->margins.max_eig_Lambda << ")\n";
    } else {
      std::cout << "N = " << row.N << "  l = " << row.l << "  no certificate\n";
      bad.items.push_back("no certificate at N = " + std::to_string(row.N) + ", l = " + std::to_string(row.l));
    }
  }

  std::cout << "== " << spec.name << ": simulation\n";
  std::vector<int> orders = spec.sweep_N.empty() ? std::vector<int>{spec.N} : spec.sweep_N;
  for (int N : orders) run_simulation(spec, build_controller(spec, N), opt, dir, nullptr);

  if (!bad.items.empty()) {
    std::cout << "MISMATCH (" << bad.items.size() << "):\n";
    for (const auto& item : bad.items) std::cout << "  " << item << '\n';
    return kNumerical;
  }
  std::cout << "all reference values reproduced\n";
  return kOk;
}

int run(const std::string& command, const Options& opt) {
  try {
    if (command == "synth") return cmd_synth(opt);
    if (command == "certify") return cmd_certify(opt);
    if (command == "simulate") return cmd_simulate(opt);
    if (command == "sweep") return cmd_sweep(opt);
    if (command == "reproduce") return cmd_reproduce(opt);
  } catch (const SingularMatrixError& e) {
    std::cerr << "numerical failure: " << e.what() << " (pivot " << e.pivot() << ")\n";
    return kNumerical;
  } catch (const NotHurwitzError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const ConvergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const SolverError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  std::cerr << "unknown command " << command << '\n';
  return kValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-dimensional input-delay compensation: synthesis, certification, simulation"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--spec", opt.spec, "run specification (JSON)");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--n", opt.n, "controller order N (overrides the spec)")->check(CLI::PositiveNumber);
    sub->add_option("--l-max", opt.l_max, "largest l for the stability test")->check(CLI::PositiveNumber);
    sub->add_option("--dt", opt.dt, "simulation step")->check(CLI::PositiveNumber);
  };
  const std::pair<const char*, const char*> commands[] = {
      {"synth", "design the gain and write the controller matrices"},
      {"certify", "search for a stability certificate over l = 1..l_max"},
      {"simulate", "closed-loop and ideal-loop trajectories as CSV"},
      {"sweep", "controller, certificate and deviation for each N in sweep_N"},
      {"reproduce", "check a spec against its expected values"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub);
    if (std::string(name) == "simulate") {
      sub->add_option("--cert", opt.cert, "certificate file; adds the Lyapunov functional column");
    }
    if (std::string(name) == "reproduce") {
      sub->add_option("--example", opt.example, "bundled example 1, 2 or 3")->check(CLI::Range(1, 3));
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidation;
  }
  return run(app.get_subcommands().front()->get_name(), opt);
}
