#pragma once

// The energy functional
//
//   J(u) = 1/2 ∫|∇u|^2 - lambda ln ∫e^u - lambda sigma ln ∫e^{gamma u},
//
// its epsilon-splitting, H1 gradient flow, the truncated Green's function
// family used for minimax upper bounds, and a dyadic search for two-region
// mass spreading.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mfe/core.hpp"
#include "mfe/diagnostics.hpp"
#include "mfe/grid.hpp"
#include "mfe/parallel.hpp"

namespace mfe {

struct FunctionalValue {
  double J = 0.0;
  double dirichlet = 0.0;  ///< 1/2 <-Delta u, u>
  double logterm_1 = 0.0;  ///< lambda ln ∫e^u
  double logterm_gamma = 0.0;  ///< lambda sigma ln ∫e^{gamma u}
  double K1 = 0.0;  ///< (1-eps) dirichlet - logterm_1
  double Kgamma = 0.0;  ///< eps dirichlet - logterm_gamma
  double epsilon_used = 0.5;
};

inline double dirichlet_energy(const Field& u) {
  return 0.5 * u.values().dot(u.domain().stiffness() * u.values());
}

inline FunctionalValue evaluate_J(const Field& u, const Params& p, double epsilon = 0.5) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("evaluate_J: epsilon must lie in (0,1)");
  FunctionalValue f;
  f.epsilon_used = epsilon;
  f.dirichlet = dirichlet_energy(u);
  f.logterm_1 = p.lambda * log_partition(u, 1.0);
  f.logterm_gamma = p.lambda * p.sigma * log_partition(u, p.gamma);
  f.J = f.dirichlet - f.logterm_1 - f.logterm_gamma;
  f.K1 = (1.0 - epsilon) * f.dirichlet - f.logterm_1;
  f.Kgamma = epsilon * f.dirichlet - f.logterm_gamma;
  return f;
}

/// G(u) = ln ∫e^u + sigma ln ∫e^{gamma u}; convex in u.
inline double G_functional(const Field& u, const Params& p) {
  return log_partition(u, 1.0) + p.sigma * log_partition(u, p.gamma);
}

// ---------------------------------------------------------------------------
// Gradient flow

enum class Certificate { minimizer, divergence, inconclusive };

inline const char* to_string(Certificate c) {
  switch (c) {
    case Certificate::minimizer: return "minimizer";
    case Certificate::divergence: return "divergence";
    default: return "inconclusive";
  }
}

/// J below this value cannot occur while lambda (1 + sigma gamma^2) <= 8 pi:
/// the sharp Moser-Trudinger inequality ln(∫e^v / |Omega|) <= ∫|∇v|^2 / 16pi + 1
/// applied to both log terms.
inline double default_divergence_floor(const Params& p, const DiscreteDomain& dom) {
  return -p.lambda * (1.0 + p.sigma) * (1.0 + std::log(dom.exact_area()));
}

struct MinimizeOptions {
  double tol = 1e-9;  ///< on the H^{-1} norm of the gradient
  int max_iter = 5000;
  double armijo = 1e-4;
  double j_floor = kNaN;  ///< NaN selects default_divergence_floor
};

struct MinimizeTraceRow {
  int iter = 0;
  double J = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

struct MinimizeResult {
  Field u;
  Certificate certificate = Certificate::inconclusive;
  double J = kNaN;
  double grad_norm = kNaN;
  double j_floor = kNaN;
  int iterations = 0;
  std::vector<MinimizeTraceRow> trace;
  std::string message;
};

/// Steepest descent in the H1_0 metric: g = (-Delta)^{-1} F(u), where F is the
/// PDE residual, with Armijo backtracking on J.
inline MinimizeResult gradient_flow_minimize(const Field& u0, const Params& p, const MinimizeOptions& opts = {}) {
  require_valid(p);
  if (!(opts.tol > 0.0)) throw ValidationError("gradient_flow_minimize: tol must be positive");
  MinimizeResult res;
  res.u = u0;
  res.u.set_trace(0.0);
  res.j_floor = std::isnan(opts.j_floor) ? default_divergence_floor(p, u0.domain()) : opts.j_floor;
  const auto& K = u0.domain().stiffness();
  double J = evaluate_J(res.u, p).J;
  double t = 1.0;
  for (int it = 0;; ++it) {
    const Field g = solve_poisson(residual(res.u, p));
    const double gn = std::sqrt(std::max(0.0, g.values().dot(K * g.values())));
    res.J = J;
    res.grad_norm = gn;
    res.iterations = it;
    if (J < res.j_floor) {
      res.certificate = Certificate::divergence;
      res.trace.push_back({it, J, gn, 0.0});
      return res;
    }
    if (gn <= opts.tol) {
      res.certificate = Certificate::minimizer;
      res.trace.push_back({it, J, gn, 0.0});
      return res;
    }
    if (it >= opts.max_iter) {
      res.message = "max_iter reached without a certificate";
      res.trace.push_back({it, J, gn, 0.0});
      return res;
    }
    t = std::min(1.0, 2.0 * t);
    bool accepted = false;
    const double J_start = J;
    // Near a minimizer the Armijo decrease drops below the round-off of J; there a
    // step is accepted when J is unchanged to round-off and the gradient shrinks.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(J));
    while (t > 1e-14) {
      Field trial = res.u;
      trial.values() -= t * g.values();
      const double Jt = trial.all_finite() ? evaluate_J(trial, p).J : kNaN;
      bool take = Jt <= J - opts.armijo * t * gn * gn;
      if (!take && std::abs(Jt - J) <= noise) {
        const Field gt = solve_poisson(residual(trial, p));
        take = std::sqrt(std::max(0.0, gt.values().dot(K * gt.values()))) < gn;
      }
      if (take) {
        res.u = std::move(trial);
        J = Jt;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    res.trace.push_back({it, J_start, gn, accepted ? t : 0.0});
    if (!accepted) {
      res.message = "line search stalled";
      res.J = J;
      return res;
    }
  }
}

// ---------------------------------------------------------------------------
// Truncated Green's function family

/// Closed curve parametrized over theta in [0, 2pi): a circle, or a rectangle
/// traversed counter-clockwise by arclength from its lower-left corner.
struct ClosedCurve {
  enum class Kind { circle, rectangle } kind = Kind::circle;
  Point centre;
  double radius = 0.0;
  Rect rect;

  static ClosedCurve circle(Point c, double r) { return {Kind::circle, c, r, {}}; }
  static ClosedCurve rectangle(Rect r) { return {Kind::rectangle, {}, 0.0, r}; }

  Point at(double theta) const {
    if (kind == Kind::circle) return {centre.x + radius * std::cos(theta), centre.y + radius * std::sin(theta)};
    const double w = rect.width(), h = rect.height(), per = 2.0 * (w + h);
    double s = std::fmod(theta / (2.0 * kPi), 1.0);
    if (s < 0) s += 1.0;
    s *= per;
    if (s < w) return {rect.x0 + s, rect.y0};
    s -= w;
    if (s < h) return {rect.x1, rect.y0 + s};
    s -= h;
    if (s < w) return {rect.x1 - s, rect.y1};
    s -= w;
    return {rect.x0, rect.y1 - s};
  }
};

struct FamilyGeometry {
  ClosedCurve curve;
  double eps0 = 0.0;
};

/// Default curve and core radius. With a hole: the rectangle midway between hole
/// and outer boundary, eps0 = min gap / 3. Plain rectangle: circle of radius
/// min(w,h)/4 about the centre, eps0 = min(w,h)/5. Disk: radius R/2, eps0 = R/4.
inline FamilyGeometry default_family_geometry(const DomainSpec& s) {
  switch (s.shape) {
    case Shape::rectangle_with_hole: {
      const Rect& q = s.hole;
      const double gap = std::min({q.x0, q.y0, s.width - q.x1, s.height - q.y1});
      return {ClosedCurve::rectangle({q.x0 / 2, q.y0 / 2, (q.x1 + s.width) / 2, (q.y1 + s.height) / 2}), gap / 3.0};
    }
    case Shape::rectangle: {
      const double m = std::min(s.width, s.height);
      return {ClosedCurve::circle({s.width / 2, s.height / 2}, m / 4), m / 5};
    }
    default: return {ClosedCurve::circle({0.0, 0.0}, s.radius / 2), s.radius / 4};
  }
}

/// 4 ln(1/(1-r)) on |X| <= 1-r, 4 ln(1/|X|) on 1-r < |X| < 1, 0 elsewhere, with X = (x - centre)/eps0.
inline double truncated_green(Point x, Point centre, double eps0, double r) {
  const double X = distance(x, centre) / eps0;
  if (X >= 1.0) return 0.0;
  if (X <= 1.0 - r) return -4.0 * std::log1p(-r);
  return -4.0 * std::log(X);
}

inline Field build_family_field(const DiscreteDomain& dom, const ClosedCurve& curve, double eps0, double r,
                                double theta) {
  if (dom.radial()) throw ValidationError("build_family_field: needs a 2-D domain");
  if (!(eps0 > 0.0)) throw ValidationError("build_family_field: eps0 must be positive");
  if (!(r >= 0.0 && r < 1.0)) throw ValidationError("build_family_field: r must lie in [0,1)");
  const Point c = curve.at(theta);
  if (!(dom.distance_to_boundary(c) >= eps0 * (1.0 - 1e-12)))
    throw ValidationError("build_family_field: ball B(curve(theta), eps0) is not inside the domain");
  if (r > 0.0 && !(r < 1.0 - 2.0 * dom.spacing() / eps0))
    throw ValidationError("build_family_field: core not resolvable, need r < 1 - 2*spacing/eps0");
  return Field::from_function(dom, [&](Point x) { return truncated_green(x, c, eps0, r); });
}

struct FamilyPoint {
  double r = 0.0;
  double theta = 0.0;
  double J = 0.0;
  double K1 = 0.0;
  double Kgamma = 0.0;
  Point center_of_mass;
};

struct FamilyScan {
  std::vector<FamilyPoint> points;  ///< r-major order
  std::vector<double> r_values;
  std::vector<double> sup_J_by_r;  ///< sup over theta
  double sup_J = kNaN;  ///< upper bound for the minimax value
  double slope = kNaN;  ///< least-squares slope of sup_theta J against ln(1/(1-r))
  double intercept = kNaN;
  double predicted_slope = kNaN;  ///< 2 (8pi - lambda)
};

inline std::array<double, 2> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  if (x.size() < 2) return {kNaN, kNaN};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return {kNaN, kNaN};
  const double slope = (n * sxy - sx * sy) / den;
  return {slope, (sy - slope * sx) / n};
}

inline FamilyScan family_scan(const Params& p, const DiscreteDomain& dom, const FamilyGeometry& geom,
                              const std::vector<double>& r_grid, const std::vector<double>& theta_grid,
                              double epsilon = 0.5) {
  require_valid(p);
  if (r_grid.empty() || theta_grid.empty()) throw ValidationError("family_scan: r and theta grids must be nonempty");
  FamilyScan s;
  s.r_values = r_grid;
  s.points.resize(r_grid.size() * theta_grid.size());
  parallel_for(s.points.size(), [&](std::size_t idx) {
    const double r = r_grid[idx / theta_grid.size()];
    const double th = theta_grid[idx % theta_grid.size()];
    const Field h = build_family_field(dom, geom.curve, geom.eps0, r, th);
    const FunctionalValue f = evaluate_J(h, p, epsilon);
    s.points[idx] = {r, th, f.J, f.K1, f.Kgamma, center_of_mass(h)};
  });
  std::vector<double> t;
  for (std::size_t a = 0; a < r_grid.size(); ++a) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < theta_grid.size(); ++b) m = std::max(m, s.points[a * theta_grid.size() + b].J);
    s.sup_J_by_r.push_back(m);
    t.push_back(-std::log1p(-r_grid[a]));
  }
  s.sup_J = *std::max_element(s.sup_J_by_r.begin(), s.sup_J_by_r.end());
  const auto [slope, icpt] = fit_line(t, s.sup_J_by_r);
  s.slope = slope;
  s.intercept = icpt;
  s.predicted_slope = 2.0 * (k8Pi - p.lambda);
  return s;
}

// ---------------------------------------------------------------------------
// Two-region spreading certificate

struct Membership {
  bool member = false;
  Rect first, second;
  double mass_first = kNaN, mass_second = kNaN;
  double gap = kNaN;
  std::string note;
};

/// Looks for two closed axis-aligned rectangles with endpoints on the level-3
/// dyadic grid of the bounding box, at distance >= d0, each carrying
/// mu_u-mass >= a0. A positive answer is a certificate; a negative one is not
/// a proof of non-membership.
inline Membership improved_mt_membership(const Field& u, double a0, double d0) {
  if (!(a0 > 0.0 && a0 <= 0.5)) throw ValidationError("improved_mt_membership: a0 must lie in (0, 1/2]");
  if (!(d0 > 0.0)) throw ValidationError("improved_mt_membership: d0 must be positive");
  const DiscreteDomain& d = u.domain();
  Membership m;
  if (d.radial()) {
    m.note = "radial fields are not searched";
    return m;
  }
  const int nx = d.nx(), ny = d.ny();
  const Field rho = density(u, 1.0);
  // 2-D prefix sums of node masses over the lattice.
  std::vector<double> P(static_cast<std::size_t>(nx + 1) * (ny + 1), 0.0);
  std::vector<double> node_mass(static_cast<std::size_t>(nx) * ny, 0.0);
  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto [i, j] = d.lattice_index(k);
    node_mass[static_cast<std::size_t>(j) * nx + i] = d.weights()[static_cast<Eigen::Index>(k)] * rho[k];
  }
  for (const auto& b : d.boundary_nodes()) node_mass[static_cast<std::size_t>(b.j) * nx + b.i] += b.weight * rho.trace();
  auto at = [&](int i, int j) -> double& { return P[static_cast<std::size_t>(j) * (nx + 1) + i]; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      at(i + 1, j + 1) = node_mass[static_cast<std::size_t>(j) * nx + i] + at(i, j + 1) + at(i + 1, j) - at(i, j);

  const Rect bb = d.bounding_box();
  const Point o = d.lattice_origin();
  const double h = d.spacing();
  constexpr int kLevels = 8;
  struct Cand {
    Rect r;
    double mass;
  };
  std::vector<Cand> cands;
  for (int a = 0; a < kLevels; ++a)
    for (int b = a + 1; b <= kLevels; ++b)
      for (int c = 0; c < kLevels; ++c)
        for (int e = c + 1; e <= kLevels; ++e) {
          Rect r{bb.x0 + bb.width() * a / kLevels, bb.y0 + bb.height() * c / kLevels,
                 bb.x0 + bb.width() * b / kLevels, bb.y0 + bb.height() * e / kLevels};
          const int i0 = std::max(0, static_cast<int>(std::ceil((r.x0 - o.x) / h - 1e-9)));
          const int i1 = std::min(nx - 1, static_cast<int>(std::floor((r.x1 - o.x) / h + 1e-9)));
          const int j0 = std::max(0, static_cast<int>(std::ceil((r.y0 - o.y) / h - 1e-9)));
          const int j1 = std::min(ny - 1, static_cast<int>(std::floor((r.y1 - o.y) / h + 1e-9)));
          double mass = 0.0;
          if (i1 >= i0 && j1 >= j0) mass = at(i1 + 1, j1 + 1) - at(i0, j1 + 1) - at(i1 + 1, j0) + at(i0, j0);
          if (mass >= a0) cands.push_back({r, mass});
        }
  double best = -1.0;
  for (std::size_t x = 0; x < cands.size(); ++x)
    for (std::size_t y = x + 1; y < cands.size(); ++y) {
      const double gap = rect_gap(cands[x].r, cands[y].r);
      if (gap < d0) continue;
      const double score = std::min(cands[x].mass, cands[y].mass);
      if (score > best) {
        best = score;
        m.member = true;
        m.first = cands[x].r;
        m.second = cands[y].r;
        m.mass_first = cands[x].mass;
        m.mass_second = cands[y].mass;
        m.gap = gap;
      }
    }
  if (!m.member) m.note = "no dyadic rectangle pair found";
  return m;
}

}  // namespace mfe
