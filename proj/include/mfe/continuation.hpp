#pragma once

// Solution branches (u, lambda) traced by natural-parameter or pseudo-arclength
// continuation, with per-point blow-up diagnostics and a CSV round trip.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mfe/core.hpp"
#include "mfe/diagnostics.hpp"
#include "mfe/variational.hpp"

namespace mfe {

struct BranchConfig {
  double lambda_start = 1.0;
  double lambda_target = k8Pi;
  double ds = 0.5;  ///< initial step (arclength units, or lambda units in natural mode)
  double ds_min = 1e-5;
  double ds_max = 4.0;
  bool arclength = true;
  double u_cutoff = 25.0;  ///< blow-up declared once u_max reaches this
  int stride = 10;  ///< keep full fields every stride-th point
  int max_points = 5000;
  /// Largest accepted sup-norm change of u per step; larger jumps are retried with half the step.
  double max_du = 1.5;
  int fast_iterations = 3;  ///< step doubles when the corrector needs at most this many
  NewtonOptions newton{};
};

inline std::vector<std::string> check_branch_config(const BranchConfig& c) {
  std::vector<std::string> v;
  if (!std::isfinite(c.lambda_start) || c.lambda_start < 0) v.push_back("branch.lambda_start must be finite and >= 0");
  if (!std::isfinite(c.lambda_target) || c.lambda_target < 0) v.push_back("branch.lambda_target must be finite and >= 0");
  if (!(c.ds_min > 0 && c.ds_min <= c.ds && c.ds <= c.ds_max))
    v.push_back("branch step bounds must satisfy 0 < ds_min <= ds <= ds_max");
  if (!(c.u_cutoff > 0)) v.push_back("branch.u_cutoff must be positive");
  if (c.stride < 1) v.push_back("branch.stride must be >= 1");
  if (c.max_points < 1) v.push_back("branch.max_points must be >= 1");
  if (!(c.max_du > 0)) v.push_back("branch.max_du must be positive");
  return v;
}

struct BranchPoint {
  double lambda = 0.0;
  double u_max = 0.0;
  std::optional<Field> u;  ///< kept for thinned points only
  double J = kNaN;
  double mass_total_1 = kNaN;
  double mass_total_gamma = kNaN;
  PeakSet peaks;
  double qid_residual = kNaN;  ///< identity residual of the leading positive peak
  double min_peak_boundary_distance = kNaN;
  double u_minus_sup = kNaN;  ///< gamma < 0 only
  double residual_norm = kNaN;
  bool verified = false;  ///< re-checked residual within 10x tolerance
  int newton_iterations = 0;
};

enum class Termination { target_reached, blow_up, step_underflow, max_points, single_point };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::target_reached: return "lambda_target_reached";
    case Termination::blow_up: return "blow_up_cutoff_reached";
    case Termination::step_underflow: return "step_size_underflow";
    case Termination::max_points: return "max_points";
    default: return "single_point";
  }
}

struct Branch {
  Params params;
  BranchConfig config;
  std::vector<BranchPoint> points;
  Termination termination = Termination::single_point;
  std::vector<std::size_t> folds;
  std::string message;
};

/// All per-point diagnostics for a converged (u, lambda).
inline BranchPoint make_branch_point(const Field& u, const Params& p, const NewtonOptions& opts, bool keep_field) {
  BranchPoint b;
  b.lambda = p.lambda;
  b.u_max = u.max();
  b.J = evaluate_J(u, p).J;
  b.mass_total_1 = p.lambda * integrate(density(u, 1.0));
  b.mass_total_gamma = p.lambda * integrate(density(u, p.gamma));
  b.peaks = detect_and_measure(u, p, default_peak_cutoff(u));
  for (const auto& pk : b.peaks)
    if (!pk.negative && std::isfinite(pk.mass_1)) {
      b.qid_residual = quadratic_identity_residual(pk.mass_1, pk.mass_gamma, p.sigma, p.gamma);
      break;
    }
  b.min_peak_boundary_distance = boundary_distance_of_peaks(b.peaks, u.domain());
  if (p.gamma < 0.0) b.u_minus_sup = split_solution(u, p).u_minus.sup_norm();
  b.residual_norm = residual(u, p).sup_norm();
  const double scale = opts.relative ? residual_scale(u, p) : 1.0;
  b.verified = b.residual_norm <= 10.0 * opts.tol * scale;
  if (keep_field) b.u = u;
  return b;
}

/// Indices k with a sign change of lambda_{k+1} - lambda_k versus lambda_k - lambda_{k-1}.
inline std::vector<std::size_t> detect_folds(const std::vector<double>& lambdas) {
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k + 1 < lambdas.size(); ++k)
    if ((lambdas[k] - lambdas[k - 1]) * (lambdas[k + 1] - lambdas[k]) < 0.0) out.push_back(k);
  return out;
}

inline std::vector<std::size_t> detect_folds(const Branch& b) {
  std::vector<double> l;
  for (const auto& p : b.points) l.push_back(p.lambda);
  return detect_folds(l);
}

/// Trace the branch through (u0 or 0) at cfg.lambda_start. Throws NumericalError
/// if the first point cannot be converged; later failures truncate the branch.
inline Branch trace_branch(const DiscreteDomain& dom, const Params& p0, const BranchConfig& cfg,
                           const Field* u0 = nullptr) {
  if (auto v = check_branch_config(cfg); !v.empty()) throw ValidationError(v.front());
  Params p = p0;
  p.lambda = cfg.lambda_start;
  require_valid(p);
  Branch br;
  br.params = p0;
  br.config = cfg;

  NewtonLinearSolver ls;
  Field u = u0 ? *u0 : Field(dom);
  auto first = newton_solve(u, p, cfg.newton, &ls);
  if (!first.report.converged)
    throw NumericalError("continuation: failed to converge the first point at lambda_start (" + first.report.message + ")");
  u = first.u;
  double lam = p.lambda;
  std::size_t count = 0;
  auto push = [&](const Field& f, double l, int iters) {
    Params q = p;
    q.lambda = l;
    br.points.push_back(make_branch_point(f, q, cfg.newton, count % static_cast<std::size_t>(cfg.stride) == 0));
    br.points.back().newton_iterations = iters;
    ++count;
  };
  push(u, lam, first.report.iterations);

  auto finish = [&](Termination t, std::string msg = {}) {
    br.termination = t;
    br.message = std::move(msg);
    if (!br.points.back().u) {
      // Endpoints always keep their fields.
      br.points.back().u = u;
    }
    br.folds = cfg.arclength ? detect_folds(br) : std::vector<std::size_t>{};
    return br;
  };

  if (cfg.lambda_start == cfg.lambda_target) return finish(Termination::single_point);
  if (u.max() >= cfg.u_cutoff) return finish(Termination::blow_up);
  const double dir = cfg.lambda_target > cfg.lambda_start ? 1.0 : -1.0;
  const double area = dom.area();
  const Eigen::VectorXd wn = dom.weights() / area;
  auto unorm2 = [&](const Eigen::VectorXd& v) { return v.cwiseProduct(v).dot(wn); };

  // Initial tangent from the linearization: J v = rho_1 + sigma gamma rho_gamma.
  Eigen::VectorXd tu;
  double tl = dir;
  {
    const Field s = source_term(u, p);
    tu = ls.solve(u, p, s.values(), nullptr).du * dir;
    const double n = std::sqrt(unorm2(tu) + 1.0);
    tu /= n;
    tl /= n;
  }
  Field u_prev = u;
  double lam_prev = lam;
  bool have_prev = false;
  double ds = cfg.ds;

  auto solve_fixed = [&](const Field& guess, double l) {
    Params q = p;
    q.lambda = l;
    return newton_solve(guess, q, cfg.newton, &ls);
  };

  while (static_cast<int>(br.points.size()) < cfg.max_points) {
    if (have_prev) {
      // Secant predictor direction.
      tu = u.values() - u_prev.values();
      tl = lam - lam_prev;
      const double n = std::sqrt(unorm2(tu) + tl * tl);
      tu /= n;
      tl /= n;
    }
    bool ok = false;
    Field un;
    double ln = lam;
    int iters = 0;
    std::string why;
    while (!ok) {
      if (ds < cfg.ds_min) {
        return finish(Termination::step_underflow,
                      "continuation: corrector failed after maximal step reduction" + (why.empty() ? "" : ": " + why));
      }
      if (cfg.arclength) {
        Field pred = u;
        pred.values() += ds * tu;
        const double lp = lam + ds * tl;
        if (lp < 0.0) {
          ds *= 0.5;
          continue;
        }
        const Eigen::VectorXd c = tu.cwiseProduct(wn);
        auto r = bordered_newton(pred, lp, p, c, tl, pred, lp, cfg.newton, ls);
        ok = r.report.converged;
        why = r.report.message;
        un = std::move(r.u);
        ln = r.lambda;
        iters = r.report.iterations;
      } else {
        double l = lam + dir * ds;
        if ((l - cfg.lambda_target) * dir > 0) l = cfg.lambda_target;
        Field pred = u;
        if (have_prev && lam != lam_prev) pred.values() += (l - lam) / (lam - lam_prev) * (u.values() - u_prev.values());
        auto r = solve_fixed(pred, l);
        ok = r.report.converged;
        why = r.report.message;
        un = std::move(r.u);
        ln = l;
        iters = r.report.iterations;
      }
      if (ok && (un.values() - u.values()).cwiseAbs().maxCoeff() > cfg.max_du) {
        ok = false;
        why = "step changed u by more than max_du";
      }
      if (!ok) ds *= 0.5;
    }
    // Clip to the target when the step crosses it.
    if ((ln - cfg.lambda_target) * dir >= 0.0) {
      Field guess = u;
      if (ln != lam) guess.values() += (cfg.lambda_target - lam) / (ln - lam) * (un.values() - u.values());
      auto r = solve_fixed(guess, cfg.lambda_target);
      if (r.report.converged) {
        u_prev = u;
        u = r.u;
        lam = cfg.lambda_target;
        push(u, lam, r.report.iterations);
        return finish(Termination::target_reached);
      }
      // Otherwise keep the corrected point and continue with smaller steps.
      ds *= 0.5;
    }
    u_prev = std::move(u);
    lam_prev = lam;
    u = std::move(un);
    lam = ln;
    have_prev = true;
    push(u, lam, iters);
    if (u.max() >= cfg.u_cutoff) return finish(Termination::blow_up);
    if (iters <= cfg.fast_iterations) ds = std::min(cfg.ds_max, 2.0 * ds);
  }
  return finish(Termination::max_points);
}

inline QuantizationReport quantization_check(const Branch& b, double tol = 0.05) {
  if (b.points.empty()) {
    QuantizationReport r;
    r.message = "empty branch";
    return r;
  }
  const BranchPoint& last = b.points.back();
  Params p = b.params;
  p.lambda = last.lambda;
  return quantization_check(last.peaks, p, last.u_max, b.termination == Termination::blow_up, tol);
}

/// Along-branch monitors: boundary-distance floor of peaks, growth of |u_minus|_inf,
/// the lambda (1 + sigma|gamma|) < 4pi/|gamma| assumption, a posteriori residuals and
/// step continuity.
struct BranchMonitor {
  double min_boundary_distance = kNaN;  ///< over points with peaks
  double u_minus_first = kNaN;
  double u_minus_max = kNaN;
  double u_minus_growth = kNaN;
  bool u_minus_bounded = true;  ///< growth <= 10
  double u_max_final = kNaN;
  double lambda_max = kNaN;
  double assumption_bound = kNaN;  ///< 4pi / (|gamma| (1 + sigma|gamma|))
  bool assumption_holds = true;
  bool all_verified = true;
  bool u_max_monotone = true;
  double max_mass_total_error = 0.0;  ///< max |lambda - lambda ∫rho_alpha|
  std::vector<std::string> findings;
};

inline BranchMonitor monitor_branch(const Branch& b) {
  BranchMonitor m;
  const Params& p = b.params;
  const double g = std::abs(p.gamma);
  if (g > 0) m.assumption_bound = 4.0 * kPi / (g * (1.0 + p.sigma * g));
  double lmax = -1.0;
  for (std::size_t k = 0; k < b.points.size(); ++k) {
    const auto& q = b.points[k];
    lmax = std::max(lmax, q.lambda);
    if (std::isfinite(q.min_peak_boundary_distance))
      m.min_boundary_distance = std::isnan(m.min_boundary_distance)
                                    ? q.min_peak_boundary_distance
                                    : std::min(m.min_boundary_distance, q.min_peak_boundary_distance);
    if (std::isfinite(q.u_minus_sup)) {
      if (std::isnan(m.u_minus_first)) m.u_minus_first = q.u_minus_sup;
      m.u_minus_max = std::isnan(m.u_minus_max) ? q.u_minus_sup : std::max(m.u_minus_max, q.u_minus_sup);
    }
    if (!q.verified) m.all_verified = false;
    if (k && q.u_max < b.points[k - 1].u_max) m.u_max_monotone = false;
    m.max_mass_total_error = std::max({m.max_mass_total_error, std::abs(q.mass_total_1 - q.lambda),
                                       std::abs(q.mass_total_gamma - q.lambda)});
  }
  m.lambda_max = lmax;
  if (!b.points.empty()) m.u_max_final = b.points.back().u_max;
  if (std::isfinite(m.u_minus_first)) {
    m.u_minus_growth = m.u_minus_max - m.u_minus_first;
    m.u_minus_bounded = m.u_minus_growth <= 10.0;
    if (!m.u_minus_bounded) m.findings.push_back("|u_minus|_inf grew by more than 10 along the branch");
  }
  if (std::isfinite(m.assumption_bound) && p.gamma < 0.0) {
    m.assumption_holds = lmax * (1.0 + p.sigma * g) < 4.0 * kPi / g;
    if (!m.assumption_holds) m.findings.push_back("lambda (1 + sigma|gamma|) reached 4pi/|gamma| on the branch");
  }
  if (std::isfinite(m.min_boundary_distance) && !(m.min_boundary_distance > 0.0))
    m.findings.push_back("a peak reached the boundary");
  if (!m.all_verified) m.findings.push_back("a stored point failed the residual re-check");
  return m;
}

// ---------------------------------------------------------------------------
// Branch CSV

inline constexpr const char* kBranchCsvHeader =
    "step,lambda,u_max,J,qid_residual,n_peaks,peak1_x,peak1_y,peak1_m1,peak1_mg,min_bdry_dist,u_minus_sup";

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct BranchCsvRow {
  long step = 0;
  double lambda = kNaN, u_max = kNaN, J = kNaN, qid_residual = kNaN;
  long n_peaks = 0;
  double peak1_x = kNaN, peak1_y = kNaN, peak1_m1 = kNaN, peak1_mg = kNaN, min_bdry_dist = kNaN, u_minus_sup = kNaN;
};

inline BranchCsvRow to_csv_row(const BranchPoint& b, long step) {
  BranchCsvRow r;
  r.step = step;
  r.lambda = b.lambda;
  r.u_max = b.u_max;
  r.J = b.J;
  r.qid_residual = b.qid_residual;
  r.n_peaks = static_cast<long>(b.peaks.size());
  if (!b.peaks.empty()) {
    const Peak& pk = b.peaks.front();
    r.peak1_x = pk.location.x;
    r.peak1_y = pk.location.y;
    r.peak1_m1 = pk.mass_1;
    r.peak1_mg = pk.mass_gamma;
  }
  r.min_bdry_dist = b.min_peak_boundary_distance;
  r.u_minus_sup = b.u_minus_sup;
  return r;
}

inline void write_branch_csv(std::ostream& os, const std::vector<BranchCsvRow>& rows) {
  os << kBranchCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.step << ',' << csv_number(r.lambda) << ',' << csv_number(r.u_max) << ',' << csv_number(r.J) << ','
       << csv_number(r.qid_residual) << ',' << r.n_peaks << ',' << csv_number(r.peak1_x) << ','
       << csv_number(r.peak1_y) << ',' << csv_number(r.peak1_m1) << ',' << csv_number(r.peak1_mg) << ','
       << csv_number(r.min_bdry_dist) << ',' << csv_number(r.u_minus_sup) << '\n';
  }
}

inline void write_branch_csv(std::ostream& os, const Branch& b) {
  std::vector<BranchCsvRow> rows;
  for (std::size_t k = 0; k < b.points.size(); ++k) rows.push_back(to_csv_row(b.points[k], static_cast<long>(k)));
  write_branch_csv(os, rows);
}

inline double parse_csv_number(const std::string& s, const std::string& column, std::size_t line) {
  if (s == "nan") return kNaN;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty())
    throw ValidationError("branch csv: column '" + column + "' line " + std::to_string(line) + ": not a number: '" + s + "'");
  return v;
}

inline std::vector<BranchCsvRow> read_branch_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("branch csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kBranchCsvHeader) throw ValidationError("branch csv: header mismatch, expected '" + std::string(kBranchCsvHeader) + "'");
  static const std::vector<std::string> cols = {"step", "lambda", "u_max", "J", "qid_residual", "n_peaks",
                                                "peak1_x", "peak1_y", "peak1_m1", "peak1_mg", "min_bdry_dist",
                                                "u_minus_sup"};
  std::vector<BranchCsvRow> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != cols.size())
      throw ValidationError("branch csv: line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields, expected " + std::to_string(cols.size()));
    std::vector<double> v(cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) v[c] = parse_csv_number(f[c], cols[c], lineno);
    BranchCsvRow r;
    r.step = static_cast<long>(v[0]);
    r.lambda = v[1];
    r.u_max = v[2];
    r.J = v[3];
    r.qid_residual = v[4];
    r.n_peaks = static_cast<long>(v[5]);
    r.peak1_x = v[6];
    r.peak1_y = v[7];
    r.peak1_m1 = v[8];
    r.peak1_mg = v[9];
    r.min_bdry_dist = v[10];
    r.u_minus_sup = v[11];
    out.push_back(r);
  }
  return out;
}

}  // namespace mfe
