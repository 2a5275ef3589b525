#pragma once

// Batch front end: one JSON document describes a run; artifacts land in an
// output directory next to a manifest.

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mfe/continuation.hpp"
#include "mfe/report.hpp"

namespace mfe {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitNumerical = 3 };

struct SolveSettings {
  std::string initial = "zero";  ///< zero | liouville | file
  double delta = 1.0;  ///< for the Liouville seed 2 ln((1+delta)/(1+delta r^2))
  std::string field;
};

struct DiagnoseSettings {
  std::string field;  ///< dump to analyse; empty means solve first
  std::vector<double> radii;
  double cutoff = kNaN;  ///< NaN selects the default peak cutoff
  double blowup_height = 25.0;  ///< u_max at or above this counts as blown up for the quantization verdict
  double a0 = 0.25, d0 = 0.25;
};

struct MinimizeSettings {
  MinimizeOptions options{};
  std::string initial = "zero";  ///< zero | random | family | file
  double amplitude = 1.0;
  double family_r = 0.9;
  double family_theta = 0.0;
  std::string field;
};

struct FamilySettings {
  std::vector<double> r;
  int theta_count = 8;
  double eps0 = kNaN;  ///< NaN selects the default geometry
  double epsilon = 0.5;
};

struct RunConfig {
  std::string command;
  DomainSpec domain;
  Params params;
  NewtonOptions newton{};
  std::uint64_t seed = 0;
  SolveSettings solve;
  BranchConfig branch;
  double quantization_tol = 0.05;
  DiagnoseSettings diagnose;
  MinimizeSettings minimize;
  FamilySettings family;
  std::string output = "mfe_out";
  std::filesystem::path base_dir;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

/// Collects violations while reading typed fields out of the config document.
class Reader {
 public:
  std::vector<std::string> errors;

  const Json* block(const Json& j, const char* key, const std::string& path) {
    if (!j.contains(key)) return nullptr;
    const Json& b = j.at(key);
    if (!b.is_object()) {
      errors.push_back(path + key + " must be an object");
      return nullptr;
    }
    return &b;
  }

  void number(const Json* j, const char* key, const std::string& path, double& out) {
    if (!j || !j->contains(key)) return;
    const Json& v = j->at(key);
    if (!v.is_number()) errors.push_back(path + key + " must be a number");
    else out = v.get<double>();
  }
  void integer(const Json* j, const char* key, const std::string& path, int& out) {
    if (!j || !j->contains(key)) return;
    const Json& v = j->at(key);
    if (!v.is_number_integer()) errors.push_back(path + key + " must be an integer");
    else out = v.get<int>();
  }
  void boolean(const Json* j, const char* key, const std::string& path, bool& out) {
    if (!j || !j->contains(key)) return;
    const Json& v = j->at(key);
    if (!v.is_boolean()) errors.push_back(path + key + " must be true or false");
    else out = v.get<bool>();
  }
  void string(const Json* j, const char* key, const std::string& path, std::string& out) {
    if (!j || !j->contains(key)) return;
    const Json& v = j->at(key);
    if (!v.is_string()) errors.push_back(path + key + " must be a string");
    else out = v.get<std::string>();
  }
  void numbers(const Json* j, const char* key, const std::string& path, std::vector<double>& out) {
    if (!j || !j->contains(key)) return;
    const Json& v = j->at(key);
    // Either an explicit list or {"from": a, "to": b, "count": n}.
    if (v.is_object()) {
      double a = kNaN, b = kNaN;
      int n = 0;
      number(&v, "from", path + key + ".", a);
      number(&v, "to", path + key + ".", b);
      integer(&v, "count", path + key + ".", n);
      if (n < 1 || !std::isfinite(a) || !std::isfinite(b)) {
        errors.push_back(path + key + " range needs finite from/to and count >= 1");
        return;
      }
      out.clear();
      for (int i = 0; i < n; ++i) out.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
      return;
    }
    if (!v.is_array()) {
      errors.push_back(path + key + " must be an array of numbers or a {from,to,count} range");
      return;
    }
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) {
        errors.push_back(path + key + " entries must be numbers");
        return;
      }
      out.push_back(e.get<double>());
    }
  }
};

}  // namespace detail

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> c = {"solve", "branch", "diagnose", "minimize", "family", "thresholds"};
  return c;
}

/// Parse and validate without running numerics. Every violation is listed.
inline RunConfig parse_config(const Json& j, const std::filesystem::path& base_dir, std::vector<std::string>& errors) {
  RunConfig c;
  c.base_dir = base_dir;
  detail::Reader rd;
  if (!j.is_object()) {
    errors.push_back("config must be a JSON object");
    return c;
  }
  rd.string(&j, "command", "", c.command);
  if (c.command.empty()) rd.errors.push_back("command is required");
  else if (std::find(known_commands().begin(), known_commands().end(), c.command) == known_commands().end())
    rd.errors.push_back("command '" + c.command + "' is not one of solve|branch|diagnose|minimize|family|thresholds");

  if (const Json* d = rd.block(j, "domain", "")) {
    std::string shape = "rectangle";
    rd.string(d, "shape", "domain.", shape);
    rd.number(d, "spacing", "domain.", c.domain.spacing);
    if (shape == "rectangle" || shape == "rectangle_with_hole") {
      c.domain.shape = shape == "rectangle" ? Shape::rectangle : Shape::rectangle_with_hole;
      rd.number(d, "width", "domain.", c.domain.width);
      rd.number(d, "height", "domain.", c.domain.height);
      if (c.domain.shape == Shape::rectangle_with_hole) {
        std::vector<double> hole;
        rd.numbers(d, "hole", "domain.", hole);
        if (hole.size() != 4) rd.errors.push_back("domain.hole must be [x0, y0, x1, y1]");
        else c.domain.hole = {hole[0], hole[1], hole[2], hole[3]};
      }
    } else if (shape == "disk") {
      c.domain.shape = Shape::disk;
      rd.number(d, "radius", "domain.", c.domain.radius);
      rd.boolean(d, "radial", "domain.", c.domain.radial);
    } else {
      rd.errors.push_back("domain.shape must be rectangle, rectangle_with_hole or disk");
    }
    if (rd.errors.empty())
      for (const auto& m : check_domain_spec(c.domain)) rd.errors.push_back(m);
  } else if (c.command != "thresholds") {
    rd.errors.push_back("domain block is required");
  }

  if (const Json* p = rd.block(j, "params", "")) {
    rd.number(p, "gamma", "params.", c.params.gamma);
    if (p->contains("tau")) {
      double tau = kNaN, lt = kNaN;
      rd.number(p, "tau", "params.", tau);
      rd.number(p, "lambda_tilde", "params.", lt);
      if (p->contains("lambda") || p->contains("sigma"))
        rd.errors.push_back("params: give either (lambda, sigma) or (tau, lambda_tilde), not both");
      if (!(tau > 0.0 && tau <= 1.0)) rd.errors.push_back("params.tau must lie in (0,1]");
      else if (!(lt >= 0.0)) rd.errors.push_back("params.lambda_tilde must be >= 0");
      else c.params = convert_tau_form(tau, lt, c.params.gamma);
    } else {
      rd.number(p, "lambda", "params.", c.params.lambda);
      rd.number(p, "sigma", "params.", c.params.sigma);
    }
    for (const auto& m : check_params(c.params)) rd.errors.push_back("params: " + m);
  } else {
    rd.errors.push_back("params block is required");
  }

  if (const Json* n = rd.block(j, "newton", "")) {
    rd.number(n, "tol", "newton.", c.newton.tol);
    rd.integer(n, "max_iter", "newton.", c.newton.max_iter);
    rd.boolean(n, "relative", "newton.", c.newton.relative);
    if (!(c.newton.tol > 0)) rd.errors.push_back("newton.tol must be positive");
    if (c.newton.max_iter < 1) rd.errors.push_back("newton.max_iter must be >= 1");
  }
  c.branch.newton = c.newton;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) rd.errors.push_back("seed must be a nonnegative integer");
    else c.seed = j["seed"].get<std::uint64_t>();
  }
  rd.string(&j, "output", "", c.output);

  auto file_exists = [&](const std::string& f, const std::string& field) {
    if (f.empty()) {
      rd.errors.push_back(field + " is required");
      return;
    }
    const std::filesystem::path fp = std::filesystem::path(f).is_absolute() ? std::filesystem::path(f) : base_dir / f;
    if (!std::filesystem::is_regular_file(fp)) rd.errors.push_back(field + ": file '" + f + "' does not exist");
  };

  if (const Json* s = rd.block(j, "solve", "")) {
    rd.string(s, "initial", "solve.", c.solve.initial);
    rd.number(s, "delta", "solve.", c.solve.delta);
    rd.string(s, "field", "solve.", c.solve.field);
  }
  if (c.command == "solve" || (c.command == "diagnose")) {
    if (c.solve.initial == "file") file_exists(c.solve.field, "solve.field");
    else if (c.solve.initial == "liouville") {
      if (c.domain.shape != Shape::disk) rd.errors.push_back("solve.initial 'liouville' needs a disk domain");
      if (!(c.solve.delta >= 0)) rd.errors.push_back("solve.delta must be >= 0");
    } else if (c.solve.initial != "zero")
      rd.errors.push_back("solve.initial must be zero, liouville or file");
  }

  if (const Json* b = rd.block(j, "branch", "")) {
    auto& bc = c.branch;
    bc.lambda_start = c.params.lambda > 0 ? c.params.lambda : bc.lambda_start;
    rd.number(b, "lambda_start", "branch.", bc.lambda_start);
    rd.number(b, "lambda_target", "branch.", bc.lambda_target);
    rd.number(b, "ds", "branch.", bc.ds);
    rd.number(b, "ds_min", "branch.", bc.ds_min);
    rd.number(b, "ds_max", "branch.", bc.ds_max);
    rd.boolean(b, "arclength", "branch.", bc.arclength);
    rd.number(b, "u_cutoff", "branch.", bc.u_cutoff);
    rd.integer(b, "stride", "branch.", bc.stride);
    rd.integer(b, "max_points", "branch.", bc.max_points);
    rd.number(b, "max_du", "branch.", bc.max_du);
    rd.number(b, "quantization_tol", "branch.", c.quantization_tol);
    for (const auto& m : check_branch_config(bc)) rd.errors.push_back(m);
  } else if (c.command == "branch") {
    rd.errors.push_back("branch block is required for the branch command");
  }

  if (const Json* d = rd.block(j, "diagnose", "")) {
    rd.string(d, "field", "diagnose.", c.diagnose.field);
    rd.numbers(d, "radii", "diagnose.", c.diagnose.radii);
    rd.number(d, "cutoff", "diagnose.", c.diagnose.cutoff);
    rd.number(d, "blowup_height", "diagnose.", c.diagnose.blowup_height);
    rd.number(d, "a0", "diagnose.", c.diagnose.a0);
    rd.number(d, "d0", "diagnose.", c.diagnose.d0);
    if (!c.diagnose.field.empty()) file_exists(c.diagnose.field, "diagnose.field");
    for (std::size_t k = 0; k < c.diagnose.radii.size(); ++k)
      if (!(c.diagnose.radii[k] > 0) || (k && c.diagnose.radii[k] < c.diagnose.radii[k - 1]))
        rd.errors.push_back("diagnose.radii must be positive and ascending");
    if (!(c.diagnose.a0 > 0 && c.diagnose.a0 <= 0.5)) rd.errors.push_back("diagnose.a0 must lie in (0, 0.5]");
    if (!(c.diagnose.d0 > 0)) rd.errors.push_back("diagnose.d0 must be positive");
  }

  if (const Json* m = rd.block(j, "minimize", "")) {
    auto& ms = c.minimize;
    rd.number(m, "tol", "minimize.", ms.options.tol);
    rd.integer(m, "max_iter", "minimize.", ms.options.max_iter);
    rd.number(m, "armijo", "minimize.", ms.options.armijo);
    rd.number(m, "j_floor", "minimize.", ms.options.j_floor);
    rd.string(m, "initial", "minimize.", ms.initial);
    rd.number(m, "amplitude", "minimize.", ms.amplitude);
    rd.number(m, "family_r", "minimize.", ms.family_r);
    rd.number(m, "family_theta", "minimize.", ms.family_theta);
    rd.string(m, "field", "minimize.", ms.field);
    if (!(ms.options.tol > 0)) rd.errors.push_back("minimize.tol must be positive");
    if (ms.options.max_iter < 1) rd.errors.push_back("minimize.max_iter must be >= 1");
    if (ms.initial == "file") file_exists(ms.field, "minimize.field");
    else if (ms.initial == "family") {
      if (!(ms.family_r >= 0 && ms.family_r < 1)) rd.errors.push_back("minimize.family_r must lie in [0,1)");
    } else if (ms.initial != "zero" && ms.initial != "random")
      rd.errors.push_back("minimize.initial must be zero, random, family or file");
  }

  if (const Json* f = rd.block(j, "family", "")) {
    rd.numbers(f, "r", "family.", c.family.r);
    rd.integer(f, "theta_count", "family.", c.family.theta_count);
    rd.number(f, "eps0", "family.", c.family.eps0);
    rd.number(f, "epsilon", "family.", c.family.epsilon);
    for (double r : c.family.r)
      if (!(r >= 0 && r < 1)) rd.errors.push_back("family.r values must lie in [0,1)");
    if (c.family.theta_count < 1) rd.errors.push_back("family.theta_count must be >= 1");
    if (!(c.family.epsilon > 0 && c.family.epsilon < 1)) rd.errors.push_back("family.epsilon must lie in (0,1)");
  }
  if (c.command == "family") {
    if (c.family.r.empty()) rd.errors.push_back("family.r must list at least one radius parameter");
    if (c.domain.shape == Shape::disk && c.domain.radial) rd.errors.push_back("family command needs a 2-D domain");
  }
  if (c.command == "thresholds" && !(std::abs(c.params.gamma) <= 1.0))
    rd.errors.push_back("params.gamma: |gamma| must not exceed 1");

  errors.insert(errors.end(), rd.errors.begin(), rd.errors.end());
  return c;
}

inline Json read_json_file(const std::filesystem::path& path, std::string* raw = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  if (raw) *raw = ss.str();
  try {
    return Json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
}

/// The validate command: all violations, no numerics. An empty list means valid.
inline std::vector<std::string> validate_config_file(const std::filesystem::path& path) {
  const Json j = read_json_file(path);
  std::vector<std::string> errors;
  parse_config(j, path.parent_path(), errors);
  return errors;
}

// ---------------------------------------------------------------------------
// Artifact writing

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  /// Write via a temporary file and rename, so readers never see partial files.
  void write(const std::string& name, const std::string& content) {
    const auto final_path = dir_ / name;
    std::filesystem::create_directories(final_path.parent_path());
    const auto tmp = final_path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write artifact '" + tmp + "'");
      out << content;
      if (!out) throw Error("short write on '" + tmp + "'");
    }
    std::filesystem::rename(tmp, final_path);
    if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
  }
  void write_json(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }
  void write_field(const std::string& name, const Field& u) {
    std::ostringstream os;
    mfe::write_field(os, u);
    write(name, os.str());
  }
  const std::vector<std::string>& files() const { return files_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

struct RunOutcome {
  int exit_code = kExitOk;
  std::string status = "ok";
  std::string message;
  std::vector<std::string> files;
};

namespace detail {

inline std::filesystem::path resolve(const RunConfig& c, const std::string& f) {
  return std::filesystem::path(f).is_absolute() ? std::filesystem::path(f) : c.base_dir / f;
}

inline Field load_field(const RunConfig& c, const DiscreteDomain& dom, const std::string& f) {
  std::ifstream in(resolve(c, f));
  if (!in) throw ValidationError("cannot read field dump '" + f + "'");
  return field_from_dump(read_field_dump(in), dom);
}

inline Field liouville_seed(const DiscreteDomain& dom, double delta) {
  const double R = dom.spec().radius;
  return Field::from_function(dom, [&](Point p) {
    const double r2 = (p.x * p.x + p.y * p.y) / (R * R);
    return 2.0 * std::log((1.0 + delta) / (1.0 + delta * r2));
  });
}

inline Json point_json(const BranchPoint& b) {
  return {{"lambda", num(b.lambda)}, {"u_max", num(b.u_max)}, {"J", num(b.J)}, {"peaks", to_json(b.peaks)},
          {"qid_residual", num(b.qid_residual)}, {"min_peak_boundary_distance", num(b.min_peak_boundary_distance)},
          {"u_minus_sup", num(b.u_minus_sup)}, {"residual_norm", num(b.residual_norm)}, {"verified", b.verified}};
}

inline std::string minimize_trace_csv(const MinimizeResult& r) {
  std::ostringstream os;
  os << "iter,J,grad_norm,step\n";
  for (const auto& t : r.trace)
    os << t.iter << ',' << csv_number(t.J) << ',' << csv_number(t.grad_norm) << ',' << csv_number(t.step) << '\n';
  return os.str();
}

inline std::string family_csv(const FamilyScan& s) {
  std::ostringstream os;
  os << "r,theta,J,K1,Kg,cm_x,cm_y\n";
  for (const auto& p : s.points)
    os << csv_number(p.r) << ',' << csv_number(p.theta) << ',' << csv_number(p.J) << ',' << csv_number(p.K1) << ','
       << csv_number(p.Kgamma) << ',' << csv_number(p.center_of_mass.x) << ',' << csv_number(p.center_of_mass.y)
       << '\n';
  return os.str();
}

}  // namespace detail

inline Json diagnostics_report(const Field& u, const Params& p, const DiagnoseSettings& s, double tol) {
  const DiscreteDomain& dom = u.domain();
  const double cut = std::isnan(s.cutoff) ? default_peak_cutoff(u) : s.cutoff;
  PeakSet peaks = detect_and_measure(u, p, cut);
  std::vector<double> radii = s.radii;
  if (radii.empty()) radii = {0.05 * dom.diameter(), 0.1 * dom.diameter(), 0.25 * dom.diameter(), dom.diameter()};
  const auto Q = concentration_function(u, radii);
  QuantizationReport q = quantization_check(peaks, p, u.max(), u.max() >= s.blowup_height, tol);
  if (u.max() < s.blowup_height) q.message = "u_max below diagnose.blowup_height";
  Json conc = Json::array();
  for (std::size_t k = 0; k < radii.size(); ++k) conc.push_back({{"r", num(radii[k])}, {"Q", num(Q[k])}});
  Json out;
  out["thresholds"] = std::abs(p.gamma) <= 1.0 ? to_json(thresholds(p.gamma, p.sigma)) : Json(nullptr);
  out["peaks"] = {{"cutoff", num(cut)}, {"items", to_json(peaks)},
                  {"min_boundary_distance", num(boundary_distance_of_peaks(peaks, dom))}};
  out["quantization"] = to_json(q);
  out["concentration"] = conc;
  out["center_of_mass"] = to_json(center_of_mass(u));
  out["u_max"] = num(u.max());
  out["residual_norm"] = num(residual(u, p).sup_norm());
  out["two_region_spreading"] = to_json(improved_mt_membership(u, s.a0, s.d0));
  return out;
}

/// Execute a parsed config. Validation errors propagate as ValidationError;
/// numerical failures are caught, recorded in the manifest and mapped to exit 3.
inline RunOutcome run_config(const RunConfig& c, const std::filesystem::path& out_dir, const std::string& raw_config) {
  ArtifactWriter w(out_dir);
  RunOutcome o;
  Json summary;
  try {
    if (c.command == "thresholds") {
      w.write_json("thresholds.json", to_json(thresholds(c.params.gamma, c.params.sigma)));
    } else {
      const DiscreteDomain dom = build_domain(c.domain);
      auto solve_field = [&](Field& u, NewtonReport& rep) {
        Field u0(dom);
        if (c.solve.initial == "liouville") u0 = detail::liouville_seed(dom, c.solve.delta);
        else if (c.solve.initial == "file") u0 = detail::load_field(c, dom, c.solve.field);
        auto r = newton_solve(u0, c.params, c.newton);
        u = r.u;
        rep = r.report;
      };
      if (c.command == "solve") {
        Field u;
        NewtonReport rep;
        solve_field(u, rep);
        w.write_field("field.txt", u);
        w.write_json("solve.json", {{"params", to_json(c.params)},
                                    {"newton", to_json(rep)},
                                    {"u_max", num(u.max())},
                                    {"J", num(evaluate_J(u, c.params).J)},
                                    {"residual_norm", num(residual(u, c.params).sup_norm())}});
        if (!rep.converged) throw NumericalError("solve: " + rep.message);
      } else if (c.command == "branch") {
        Params p = c.params;
        const Branch b = trace_branch(dom, p, c.branch);
        std::ostringstream csv;
        write_branch_csv(csv, b);
        w.write("branch.csv", csv.str());
        Json fields = Json::array();
        for (std::size_t k = 0; k < b.points.size(); ++k)
          if (b.points[k].u) {
            char name[40];
            std::snprintf(name, sizeof name, "fields/point_%05zu.txt", k);
            w.write_field(name, *b.points[k].u);
            fields.push_back({{"step", k}, {"file", name}});
          }
        Json folds = Json::array();
        for (auto f : b.folds) folds.push_back(f);
        w.write_json("branch.json", {{"params", to_json(p)},
                                     {"termination", to_string(b.termination)},
                                     {"message", b.message},
                                     {"points", b.points.size()},
                                     {"folds", folds},
                                     {"last_point", detail::point_json(b.points.back())},
                                     {"quantization", to_json(quantization_check(b, c.quantization_tol))},
                                     {"monitor", to_json(monitor_branch(b))},
                                     {"fields", fields}});
        if (b.termination == Termination::step_underflow) o.message = b.message;
      } else if (c.command == "diagnose") {
        Field u;
        if (!c.diagnose.field.empty()) {
          u = detail::load_field(c, dom, c.diagnose.field);
        } else {
          NewtonReport rep;
          solve_field(u, rep);
          w.write_field("field.txt", u);
          if (!rep.converged) throw NumericalError("diagnose: solve failed: " + rep.message);
        }
        w.write_json("diagnostics.json", diagnostics_report(u, c.params, c.diagnose, c.quantization_tol));
      } else if (c.command == "minimize") {
        const auto& ms = c.minimize;
        Field u0(dom);
        if (ms.initial == "random") {
          std::mt19937_64 rng(c.seed);
          std::uniform_real_distribution<double> U(-ms.amplitude, ms.amplitude);
          for (std::size_t k = 0; k < u0.size(); ++k) u0[k] = U(rng);
        } else if (ms.initial == "family") {
          const auto g = default_family_geometry(dom.spec());
          u0 = build_family_field(dom, g.curve, g.eps0, ms.family_r, ms.family_theta);
        } else if (ms.initial == "file") {
          u0 = detail::load_field(c, dom, ms.field);
        }
        const MinimizeResult r = gradient_flow_minimize(u0, c.params, ms.options);
        w.write("minimize_trace.csv", detail::minimize_trace_csv(r));
        w.write_field("minimizer.txt", r.u);
        w.write_json("minimize.json", {{"params", to_json(c.params)},
                                       {"certificate", to_string(r.certificate)},
                                       {"J", num(r.J)},
                                       {"grad_norm", num(r.grad_norm)},
                                       {"j_floor", num(r.j_floor)},
                                       {"iterations", r.iterations},
                                       {"residual_norm", num(residual(r.u, c.params).sup_norm())},
                                       {"message", r.message}});
      } else if (c.command == "family") {
        FamilyGeometry g = default_family_geometry(dom.spec());
        if (!std::isnan(c.family.eps0)) g.eps0 = c.family.eps0;
        std::vector<double> th;
        for (int k = 0; k < c.family.theta_count; ++k) th.push_back(2.0 * kPi * k / c.family.theta_count);
        const FamilyScan s = family_scan(c.params, dom, g, c.family.r, th, c.family.epsilon);
        w.write("family.csv", detail::family_csv(s));
        Json by_r = Json::array();
        for (std::size_t k = 0; k < s.r_values.size(); ++k)
          by_r.push_back({{"r", num(s.r_values[k])}, {"sup_J", num(s.sup_J_by_r[k])}});
        w.write_json("family.json", {{"params", to_json(c.params)},
                                     {"eps0", num(g.eps0)},
                                     {"sup_J", num(s.sup_J)},
                                     {"slope", num(s.slope)},
                                     {"intercept", num(s.intercept)},
                                     {"predicted_slope", num(s.predicted_slope)},
                                     {"sup_J_by_r", by_r}});
      }
    }
  } catch (const NumericalError& e) {
    o.exit_code = kExitNumerical;
    o.status = "numerical_failure";
    o.message = e.what();
  }
  std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  Json manifest = {{"tool", "mfe"},
                   {"version", kToolVersion},
                   {"command", c.command},
                   {"config_hash", "fnv1a64:" + hex64(fnv1a(raw_config))},
                   {"seed", c.seed},
                   {"status", o.status},
                   {"partial", o.exit_code != kExitOk},
                   {"message", o.message},
                   {"files", w.files()},
                   {"created_utc", stamp}};
  w.write_json("manifest.json", manifest);
  o.files = w.files();
  return o;
}

}  // namespace mfe
