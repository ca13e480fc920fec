#include "delaycomp/io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace delaycomp {

using nlohmann::json;

namespace {

const json& member(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw SpecError(where + ": missing \"" + key + "\"");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw SpecError(where + ": expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw SpecError(where + ": expected an integer");
  return j.get<int>();
}

bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) throw SpecError(where + ": expected true or false");
  return j.get<bool>();
}

Vector vector_from(const json& j, const std::string& where) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) throw SpecError(where + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = number(j[i], where + "[" + std::to_string(i) + "]");
  }
  return v;
}

RowVector row_from(const json& j, const std::string& where) {
  return vector_from(j, where).transpose();
}

Matrix matrix_from(const json& j, const std::string& where) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw SpecError(where + ": expected a nested array");
  const auto rows = j.size();
  if (!j[0].is_array()) throw SpecError(where + ": expected rows");
  const auto cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw SpecError(where + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          number(j[r][c], where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
  }
  return m;
}

std::complex<double> complex_from(const json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2) return {number(j[0], where), number(j[1], where)};
  throw SpecError(where + ": a pole is a number or a [re, im] pair");
}

std::vector<std::complex<double>> poles_from(const json& j, const std::string& where) {
  if (!j.is_array()) throw SpecError(where + ": expected an array of poles");
  std::vector<std::complex<double>> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(complex_from(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

template <typename Derived>
json to_json(const Eigen::MatrixBase<Derived>& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename Derived>
json flat_json(const Eigen::MatrixBase<Derived>& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json parse_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SpecError(std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

SimConfig RunSpec::sim_config() const {
  SimConfig cfg;
  cfg.dt = sim.dt > 0.0 ? sim.dt : plant.D / 100.0;
  cfg.t_end = sim.t_end;
  cfg.reference = sim.reference;
  cfg.X0 = sim.X0;
  return cfg;
}

RunSpec parse_run_spec(const std::string& text) {
  const json doc = parse_document(text);
  if (!doc.is_object()) throw SpecError("run spec must be a JSON object");
  RunSpec spec;
  spec.name = doc.value("name", std::string("unnamed"));

  const json& plant = member(doc, "plant", "run spec");
  spec.plant.A = matrix_from(member(plant, "A", "plant"), "plant.A");
  spec.plant.B = vector_from(member(plant, "B", "plant"), "plant.B");
  spec.plant.C = row_from(member(plant, "C", "plant"), "plant.C");
  spec.plant.D = number(member(plant, "D", "plant"), "plant.D");

  const json& gain = member(doc, "gain", "run spec");
  const int modes = static_cast<int>(gain.contains("K")) + static_cast<int>(gain.contains("poles")) +
                    static_cast<int>(gain.contains("lqr"));
  if (modes != 1) throw SpecError("gain: give exactly one of \"K\", \"poles\", \"lqr\"");
  if (gain.contains("K")) {
    spec.gain.mode = GainDesign::Mode::Explicit;
    spec.gain.K = row_from(gain.at("K"), "gain.K");
  } else if (gain.contains("poles")) {
    spec.gain.mode = GainDesign::Mode::Poles;
    spec.gain.poles = poles_from(gain.at("poles"), "gain.poles");
  } else {
    spec.gain.mode = GainDesign::Mode::Lqr;
    const json& lqr = gain.at("lqr");
    spec.gain.Q = matrix_from(member(lqr, "Q", "gain.lqr"), "gain.lqr.Q");
    spec.gain.R = number(member(lqr, "R", "gain.lqr"), "gain.lqr.R");
  }

  spec.N = integer(member(doc, "N", "run spec"), "N");
  if (doc.contains("l")) spec.l = integer(doc.at("l"), "l");
  if (doc.contains("l_max")) spec.l_max = integer(doc.at("l_max"), "l_max");
  if (doc.contains("unchecked")) spec.unchecked = boolean(doc.at("unchecked"), "unchecked");

  if (doc.contains("simulation")) {
    const json& sim = doc.at("simulation");
    if (sim.contains("dt")) spec.sim.dt = number(sim.at("dt"), "simulation.dt");
    if (sim.contains("t_end")) spec.sim.t_end = number(sim.at("t_end"), "simulation.t_end");
    if (sim.contains("X0")) spec.sim.X0 = vector_from(sim.at("X0"), "simulation.X0");
    if (sim.contains("ideal")) spec.sim.ideal = boolean(sim.at("ideal"), "simulation.ideal");
    if (sim.contains("reference")) {
      const json& ref = sim.at("reference");
      if (!ref.is_array()) throw SpecError("simulation.reference: expected [[time, value], ...]");
      for (const auto& step : ref) {
        if (!step.is_array() || step.size() != 2) {
          throw SpecError("simulation.reference: each step is [time, value]");
        }
        spec.sim.reference.steps.emplace_back(number(step[0], "reference time"),
                                              number(step[1], "reference value"));
      }
    }
  }
  if (doc.contains("sweep_N")) {
    if (!doc.at("sweep_N").is_array()) throw SpecError("sweep_N: expected an array");
    for (const auto& n : doc.at("sweep_N")) spec.sweep_N.push_back(integer(n, "sweep_N"));
  }

  if (doc.contains("expected")) {
    const json& e = doc.at("expected");
    if (e.contains("K")) spec.expected.K = row_from(e.at("K"), "expected.K");
    if (e.contains("K1")) spec.expected.K1 = row_from(e.at("K1"), "expected.K1");
    if (e.contains("K2")) spec.expected.K2 = row_from(e.at("K2"), "expected.K2");
    if (e.contains("Atilde")) spec.expected.Atilde = matrix_from(e.at("Atilde"), "expected.Atilde");
    if (e.contains("Btilde")) {
      const json& bt = e.at("Btilde");
      // A flat array is the single column of a one-state plant.
      spec.expected.Btilde = bt.is_array() && !bt.empty() && bt[0].is_number()
                                 ? Matrix(vector_from(bt, "expected.Btilde"))
                                 : matrix_from(bt, "expected.Btilde");
    }
    if (e.contains("H")) spec.expected.H = number(e.at("H"), "expected.H");
    if (e.contains("closed_loop_poles")) {
      spec.expected.closed_loop_poles = poles_from(e.at("closed_loop_poles"), "expected.closed_loop_poles");
    }
    if (e.contains("tolerance")) spec.expected.tolerance = number(e.at("tolerance"), "expected.tolerance");
    if (e.contains("pole_tolerance")) {
      spec.expected.pole_tolerance = number(e.at("pole_tolerance"), "expected.pole_tolerance");
    }
    if (e.contains("table")) {
      for (const auto& row : e.at("table")) {
        spec.expected.table.push_back(
            {integer(member(row, "N", "expected.table"), "N"), integer(member(row, "l", "expected.table"), "l")});
      }
    }
  }
  return spec;
}

RunSpec load_run_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open run spec " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_spec(ss.str());
}

RowVector design_gain(const PlantModel& plant, const GainDesign& gain) {
  switch (gain.mode) {
    case GainDesign::Mode::Explicit:
      return gain.K;
    case GainDesign::Mode::Poles:
      return pole_place_siso(plant.A, plant.B, gain.poles);
    case GainDesign::Mode::Lqr: {
      const Matrix R = Matrix::Constant(1, 1, gain.R);
      return solve_care(plant.A, plant.B, gain.Q, R).K;
    }
  }
  throw SpecError("unknown gain design mode");
}

DynamicController build_controller(const RunSpec& spec, int N) {
  spec.plant.validate();
  const RowVector K = design_gain(spec.plant, spec.gain);
  if (spec.unchecked) {
    if (N < 2) throw DomainError("controller order N must be >= 2, got " + std::to_string(N));
    return assemble_controller(spec.plant, K, N);
  }
  return synth_controller(spec.plant, K, N);
}

std::string controller_to_json(const DynamicController& c) {
  json doc;
  doc["N"] = c.cfg.N;
  doc["D"] = c.cfg.D;
  doc["h"] = c.cfg.h;
  doc["K"] = flat_json(c.K);
  doc["K1"] = flat_json(c.K1);
  doc["K2"] = flat_json(c.K2);
  doc["Atilde"] = to_json(c.Atilde);
  doc["Btilde"] = to_json(c.Btilde);
  doc["H"] = c.H ? json(*c.H) : json(nullptr);
  doc["reference_input"] = flat_json(c.reference_input);
  doc["E"] = to_json(c.fem.E);
  doc["A_d"] = to_json(c.fem.A);
  doc["B_d"] = flat_json(c.fem.B);
  return doc.dump(2) + "\n";
}

DynamicController controller_from_json(const std::string& text) {
  const json doc = parse_document(text);
  DynamicController c;
  c.cfg.N = integer(member(doc, "N", "controller"), "N");
  c.cfg.D = number(member(doc, "D", "controller"), "D");
  c.cfg.h = number(member(doc, "h", "controller"), "h");
  c.K = row_from(member(doc, "K", "controller"), "K");
  c.K1 = row_from(member(doc, "K1", "controller"), "K1");
  c.K2 = row_from(member(doc, "K2", "controller"), "K2");
  c.Atilde = matrix_from(member(doc, "Atilde", "controller"), "Atilde");
  c.Btilde = matrix_from(member(doc, "Btilde", "controller"), "Btilde");
  const json& H = member(doc, "H", "controller");
  if (!H.is_null()) c.H = number(H, "H");
  c.reference_input = vector_from(member(doc, "reference_input", "controller"), "reference_input");
  c.fem.E = matrix_from(member(doc, "E", "controller"), "E");
  c.fem.A = matrix_from(member(doc, "A_d", "controller"), "A_d");
  c.fem.B = vector_from(member(doc, "B_d", "controller"), "B_d");
  const auto N = static_cast<Eigen::Index>(c.cfg.N);
  if (c.K1.size() != N || c.Atilde.rows() != N || c.Atilde.cols() != N || c.Btilde.rows() != N ||
      c.Btilde.cols() != c.K2.size() || c.reference_input.size() != N || c.K.size() != c.K2.size()) {
    throw SpecError("controller document has inconsistent dimensions");
  }
  return c;
}

std::string certificate_to_json(const Certificate& cert) {
  json doc;
  doc["n"] = cert.n;
  doc["N"] = cert.N;
  doc["l"] = cert.l;
  doc["D"] = cert.D;
  doc["alpha"] = cert.alpha;
  doc["P"] = to_json(cert.P);
  doc["margins"] = {{"min_eig_P", cert.margins.min_eig_P},
                    {"max_eig_Lambda", cert.margins.max_eig_Lambda},
                    {"alpha", cert.margins.alpha},
                    {"passed", cert.margins.passed}};
  doc["solver_margin"] = cert.solver_margin;
  doc["iterations"] = cert.iterations;
  return doc.dump(2) + "\n";
}

Certificate certificate_from_json(const std::string& text) {
  const json doc = parse_document(text);
  Certificate cert;
  cert.n = integer(member(doc, "n", "certificate"), "n");
  cert.N = integer(member(doc, "N", "certificate"), "N");
  cert.l = integer(member(doc, "l", "certificate"), "l");
  cert.D = number(member(doc, "D", "certificate"), "D");
  cert.alpha = number(member(doc, "alpha", "certificate"), "alpha");
  cert.P = matrix_from(member(doc, "P", "certificate"), "P");
  const json& m = member(doc, "margins", "certificate");
  cert.margins.min_eig_P = number(member(m, "min_eig_P", "margins"), "min_eig_P");
  cert.margins.max_eig_Lambda = number(member(m, "max_eig_Lambda", "margins"), "max_eig_Lambda");
  cert.margins.alpha = number(member(m, "alpha", "margins"), "alpha");
  cert.margins.passed = boolean(member(m, "passed", "margins"), "passed");
  cert.solver_margin = doc.value("solver_margin", 0.0);
  cert.iterations = doc.value("iterations", 0);
  const int size = cert.n + cert.N + cert.l;
  if (cert.P.rows() != size || cert.P.cols() != size) {
    throw SpecError("certificate matrix does not match n + N + l");
  }
  return cert;
}

std::string min_l_report_to_json(const MinLReport& report, int N) {
  json doc;
  doc["N"] = N;
  doc["min_feasible_l"] = report.min_feasible_l ? json(*report.min_feasible_l) : json(nullptr);
  json entries = json::array();
  for (const auto& e : report.entries) {
    const char* status = e.status == LSweepEntry::Status::Certified  ? "certified"
                         : e.status == LSweepEntry::Status::NotFound ? "not_found"
                                                                     : "error";
    entries.push_back({{"l", e.l}, {"status", status}, {"margin", e.margin}, {"message", e.message}});
  }
  doc["entries"] = std::move(entries);
  return doc.dump(2) + "\n";
}

}  // namespace delaycomp
