#pragma once

// Blow-up diagnostics: closed-form thresholds, peak detection, local masses,
// the quadratic mass identity, center of mass and the concentration function.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mfe/core.hpp"
#include "mfe/grid.hpp"

namespace mfe {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Thresholds

struct Thresholds {
  double gamma = 0.0;
  double sigma = 0.0;
  /// (1 - 2|gamma|) / (2 gamma^2); NaN unless 0 < |gamma| < 1/2.
  double sigma_gamma = kNaN;
  double lambda_bar = kNaN;
  /// tau * lambda_bar^P for the two-atom measure, tau = 1/(1+sigma).
  double lambda_bar_P_scaled = kNaN;
  std::vector<double> candidates;
  bool admissible = false;
  std::array<double, 2> window{k8Pi, kNaN};
};

inline Thresholds thresholds(double gamma, double sigma) {
  if (!(std::abs(gamma) <= 1.0)) throw ValidationError("thresholds: |gamma| must not exceed 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("thresholds: sigma must be finite and >= 0");
  Thresholds t;
  t.gamma = gamma;
  t.sigma = sigma;
  const double g = std::abs(gamma);
  const double inf = std::numeric_limits<double>::infinity();
  if (g > 0.0 && g < 0.5) t.sigma_gamma = (1.0 - 2.0 * g) / (2.0 * gamma * gamma);
  const double first = 16.0 * kPi / (1.0 + 2.0 * sigma * gamma * gamma);
  const double second = g > 0.0 ? 4.0 * kPi / (g * (1.0 + g * sigma)) : inf;
  t.lambda_bar = std::min(first, second);

  const double sg2 = sigma * gamma * gamma;
  t.candidates.push_back(k8Pi);
  t.candidates.push_back(sg2 > 0.0 ? k8Pi / sg2 : inf);
  if (gamma > 0.0) t.candidates.push_back(k8Pi * (1.0 + sigma) / ((1.0 + sigma * gamma) * (1.0 + sigma * gamma)));
  t.lambda_bar_P_scaled = *std::min_element(t.candidates.begin(), t.candidates.end());

  t.admissible = std::isfinite(t.sigma_gamma) && sigma > 0.0 && sigma < t.sigma_gamma;
  t.window = {k8Pi, t.lambda_bar};
  return t;
}

/// The epsilon interval [lambda sigma gamma^2 / 8pi, 1 - lambda/16pi) used to split J.
/// Empty (lo >= hi) exactly when lambda (1 + 2 sigma gamma^2) >= 16 pi.
inline std::array<double, 2> epsilon_interval(const Params& p) {
  return {p.lambda * p.sigma * p.gamma * p.gamma / k8Pi, 1.0 - p.lambda / (16.0 * kPi)};
}

// ---------------------------------------------------------------------------
// Peaks and local masses

struct Peak {
  Point location;
  std::size_t node = 0;
  /// u at the peak (negative for minima).
  double height = 0.0;
  bool negative = false;
  double radius = 0.0;
  double mass_1 = kNaN;
  double mass_gamma = kNaN;
  /// Max relative change of mass_1 when the radius is scaled by 0.75 and 1.25.
  double plateau_variation = kNaN;
  bool plateau_ok = false;
};

using PeakSet = std::vector<Peak>;

/// Default detection cutoff: max(u_max - 10, 5).
inline double default_peak_cutoff(const Field& u) { return std::max(u.max() - 10.0, 5.0); }

namespace detail {

inline double uniform_value(const Field& u, long k) { return k >= 0 ? u[static_cast<std::size_t>(k)] : u.trace(); }

/// Fraction of the circle of radius r about the origin lying in the open ball B((c,0), R).
inline double ring_fraction(double r, double c, double R) {
  if (r + c < R) return 1.0;
  if (r <= 0.0) return c < R ? 1.0 : 0.0;
  if (c <= 0.0) return r < R ? 1.0 : 0.0;
  if (std::abs(r - c) >= R) return 0.0;
  const double cphi = std::clamp((r * r + c * c - R * R) / (2.0 * r * c), -1.0, 1.0);
  return std::acos(cphi) / kPi;
}

/// Weighted sum of g over (domain ∩ open ball), with g's trace on boundary nodes.
inline double ball_sum(const Field& g, Point c, double R) {
  const DiscreteDomain& d = g.domain();
  double s = 0.0;
  if (d.radial()) {
    const double off = std::hypot(c.x, c.y);
    for (std::size_t k = 0; k < d.size(); ++k)
      s += d.weights()[static_cast<Eigen::Index>(k)] * g[k] * ring_fraction(d.node(k).x, off, R);
    for (const auto& b : d.boundary_nodes()) s += b.weight * g.trace() * ring_fraction(b.p.x, off, R);
    return s;
  }
  const double h = d.spacing();
  const Point o = d.lattice_origin();
  const int i0 = std::max(0, static_cast<int>(std::floor((c.x - R - o.x) / h)));
  const int i1 = std::min(d.nx() - 1, static_cast<int>(std::ceil((c.x + R - o.x) / h)));
  const int j0 = std::max(0, static_cast<int>(std::floor((c.y - R - o.y) / h)));
  const int j1 = std::min(d.ny() - 1, static_cast<int>(std::ceil((c.y + R - o.y) / h)));
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) {
      if (d.kind_at(i, j) != NodeKind::interior) continue;
      if (distance(d.lattice_point(i, j), c) < R) {
        const long k = d.index_at(i, j);
        s += d.weights()[k] * g[static_cast<std::size_t>(k)];
      }
    }
  if (g.trace() != 0.0)
    for (const auto& b : d.boundary_nodes())
      if (distance(b.p, c) < R) s += b.weight * g.trace();
  return s;
}

}  // namespace detail

/// lambda * ∫_{B(center,radius) ∩ Omega} rho_alpha.
inline double local_mass(const Field& u, const Params& p, Point center, double radius, double alpha) {
  const double h = u.domain().spacing();
  if (!(radius >= 2.0 * h))
    throw ValidationError("local_mass: radius " + std::to_string(radius) + " is below two grid spacings");
  return p.lambda * detail::ball_sum(density(u, alpha), center, radius);
}

/// Strict local maxima of u above `cutoff` (8-neighbour test; boundary and hole
/// nodes count as the trace value), plus strict minima below -cutoff flagged
/// as negative. Sorted by |height| descending. Radii follow
/// min(separation/2, boundary distance/4, diam/4).
inline PeakSet find_peaks(const Field& u, double cutoff) {
  const DiscreteDomain& d = u.domain();
  PeakSet out;
  auto scan = [&](double sgn) {
    for (std::size_t k = 0; k < d.size(); ++k) {
      const double v = sgn * u[k];
      if (!(v > cutoff)) continue;
      const auto [i, j] = d.lattice_index(k);
      bool strict = true;
      if (d.radial()) {
        // Node 0 is the centre; reflect across it.
        const long left = i > 0 ? d.index_at(i - 1, 0) : d.index_at(1, 0);
        const long right = d.index_at(i + 1, 0);
        strict = v > sgn * detail::uniform_value(u, left) && v > sgn * detail::uniform_value(u, right);
      } else {
        for (int dj = -1; dj <= 1 && strict; ++dj)
          for (int di = -1; di <= 1; ++di) {
            if (!di && !dj) continue;
            if (!(v > sgn * detail::uniform_value(u, d.index_at(i + di, j + dj)))) {
              strict = false;
              break;
            }
          }
      }
      if (!strict) continue;
      Peak pk;
      pk.node = k;
      pk.location = d.node(k);
      pk.height = u[k];
      pk.negative = sgn < 0;
      out.push_back(pk);
    }
  };
  scan(1.0);
  scan(-1.0);
  std::sort(out.begin(), out.end(), [](const Peak& a, const Peak& b) {
    if (std::abs(a.height) != std::abs(b.height)) return std::abs(a.height) > std::abs(b.height);
    return a.node < b.node;
  });
  for (std::size_t a = 0; a < out.size(); ++a) {
    double r = 0.25 * d.diameter();
    r = std::min(r, 0.25 * d.distance_to_boundary(out[a].location));
    for (std::size_t b = 0; b < out.size(); ++b)
      if (a != b) r = std::min(r, 0.5 * distance(out[a].location, out[b].location) * (1.0 - 1e-12));
    out[a].radius = r;
  }
  return out;
}

/// Fill local masses and the plateau check. Peaks whose radius is below two
/// grid spacings keep NaN masses.
inline void measure_peaks(PeakSet& peaks, const Field& u, const Params& p) {
  const double h = u.domain().spacing();
  const Field r1 = density(u, 1.0);
  const Field rg = density(u, p.gamma);
  for (auto& pk : peaks) {
    if (pk.radius < 2.0 * h) continue;
    pk.mass_1 = p.lambda * detail::ball_sum(r1, pk.location, pk.radius);
    pk.mass_gamma = p.lambda * detail::ball_sum(rg, pk.location, pk.radius);
    if (0.75 * pk.radius >= 2.0 * h && pk.mass_1 > 0.0) {
      const double lo = p.lambda * detail::ball_sum(r1, pk.location, 0.75 * pk.radius);
      const double hi = p.lambda * detail::ball_sum(r1, pk.location, 1.25 * pk.radius);
      pk.plateau_variation = std::max(std::abs(lo - pk.mass_1), std::abs(hi - pk.mass_1)) / pk.mass_1;
      pk.plateau_ok = pk.plateau_variation < 0.01;
    }
  }
}

inline PeakSet detect_and_measure(const Field& u, const Params& p, double cutoff) {
  PeakSet s = find_peaks(u, cutoff);
  measure_peaks(s, u, p);
  return s;
}

/// 8pi (m1 + sigma mg) - (m1 + sigma gamma mg)^2.
inline double quadratic_identity_residual(double m1, double mg, double sigma, double gamma) {
  const double a = m1 + sigma * gamma * mg;
  return k8Pi * (m1 + sigma * mg) - a * a;
}

/// Min boundary distance over peaks; NaN for an empty set.
inline double boundary_distance_of_peaks(const PeakSet& peaks, const DiscreteDomain& dom) {
  if (peaks.empty()) return kNaN;
  double m = std::numeric_limits<double>::infinity();
  for (const auto& pk : peaks) m = std::min(m, dom.distance_to_boundary(pk.location));
  return m;
}

// ---------------------------------------------------------------------------
// Quantization

enum class Verdict { pass, fail, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "PASS";
    case Verdict::fail: return "FAIL";
    default: return "INCONCLUSIVE";
  }
}

struct PeakQuantization {
  Point location;
  double mass_1 = kNaN;
  double mass_gamma = kNaN;
  double mass_1_deviation = kNaN;  ///< |m1 - 8pi| / 8pi
  double gamma_share = kNaN;       ///< sigma |gamma| mg / m1
  double identity_residual = kNaN;
  double identity_relative = kNaN;  ///< |identity_residual| / (8pi)^2
};

struct QuantizationReport {
  Verdict verdict = Verdict::inconclusive;
  double lambda = kNaN;
  double u_max = kNaN;
  int nearest_k = 0;
  double lambda_distance = kNaN;  ///< |lambda - 8pi k| / 8pi
  double total_local_mass_1 = kNaN;
  std::vector<PeakQuantization> peaks;
  double tolerance = 0.05;
  std::string message;
};

/// Quantization check on the final state of a blow-up run. `blew_up` says whether
/// the run reached its blow-up cutoff; otherwise the report is inconclusive.
inline QuantizationReport quantization_check(const PeakSet& peaks, const Params& p, double u_max, bool blew_up,
                                             double tol = 0.05) {
  QuantizationReport r;
  r.tolerance = tol;
  r.lambda = p.lambda;
  r.u_max = u_max;
  r.nearest_k = static_cast<int>(std::lround(p.lambda / k8Pi));
  r.lambda_distance = std::abs(p.lambda - k8Pi * r.nearest_k) / k8Pi;
  if (!blew_up) {
    r.message = "branch did not reach the blow-up cutoff";
    return r;
  }
  double total = 0.0;
  bool ok = true;
  int positive = 0;
  for (const auto& pk : peaks) {
    if (pk.negative) continue;
    ++positive;
    PeakQuantization q;
    q.location = pk.location;
    q.mass_1 = pk.mass_1;
    q.mass_gamma = pk.mass_gamma;
    q.mass_1_deviation = std::abs(pk.mass_1 - k8Pi) / k8Pi;
    q.gamma_share = p.sigma * std::abs(p.gamma) * pk.mass_gamma / pk.mass_1;
    q.identity_residual = quadratic_identity_residual(pk.mass_1, pk.mass_gamma, p.sigma, p.gamma);
    q.identity_relative = std::abs(q.identity_residual) / (k8Pi * k8Pi);
    total += pk.mass_1;
    if (!(q.mass_1_deviation <= tol) || !(q.gamma_share <= tol)) ok = false;
    r.peaks.push_back(q);
  }
  r.total_local_mass_1 = total;
  if (positive == 0) {
    r.message = "no positive peak above the detection cutoff";
    return r;
  }
  r.verdict = ok ? Verdict::pass : Verdict::fail;
  if (!ok) r.message = "a peak mass is outside tolerance";
  return r;
}

// ---------------------------------------------------------------------------
// Center of mass and concentration

/// ∫ x dmu_u with mu_u = e^u dx / ∫ e^u. Radial fields are centred at the origin.
inline Point center_of_mass(const Field& u) {
  const DiscreteDomain& d = u.domain();
  if (d.radial()) return {0.0, 0.0};
  const Field r = density(u, 1.0);
  Point c{0.0, 0.0};
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double m = d.weights()[static_cast<Eigen::Index>(k)] * r[k];
    const Point q = d.node(k);
    c.x += m * q.x;
    c.y += m * q.y;
  }
  for (const auto& b : d.boundary_nodes()) {
    c.x += b.weight * r.trace() * b.p.x;
    c.y += b.weight * r.trace() * b.p.y;
  }
  return c;
}

/// Q(r) = sup over grid nodes x of mu_u(B(x, r) ∩ Omega); 1 for r >= diam.
inline std::vector<double> concentration_function(const Field& u, const std::vector<double>& radii) {
  const DiscreteDomain& d = u.domain();
  for (std::size_t a = 0; a < radii.size(); ++a) {
    if (!(radii[a] > 0.0)) throw ValidationError("concentration_function: radii must be positive");
    if (a && !(radii[a] >= radii[a - 1])) throw ValidationError("concentration_function: radii must be ascending");
  }
  const Field rho = density(u, 1.0);
  std::vector<double> out;
  out.reserve(radii.size());
  if (d.radial()) {
    for (double R : radii) {
      if (R >= d.diameter()) {
        out.push_back(1.0);
        continue;
      }
      double best = 0.0;
      for (std::size_t k = 0; k < d.size(); ++k) best = std::max(best, detail::ball_sum(rho, d.node(k), R));
      out.push_back(std::min(best, 1.0));
    }
    return out;
  }
  // Node masses on the full lattice, boundary nodes included.
  const int nx = d.nx(), ny = d.ny();
  std::vector<double> mass(static_cast<std::size_t>(nx) * ny, 0.0);
  std::vector<char> centre(mass.size(), 0);
  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto [i, j] = d.lattice_index(k);
    mass[static_cast<std::size_t>(j) * nx + i] = d.weights()[static_cast<Eigen::Index>(k)] * rho[k];
    centre[static_cast<std::size_t>(j) * nx + i] = 1;
  }
  for (const auto& b : d.boundary_nodes()) {
    mass[static_cast<std::size_t>(b.j) * nx + b.i] += b.weight * rho.trace();
    centre[static_cast<std::size_t>(b.j) * nx + b.i] = 1;
  }
  const double h = d.spacing();
  for (double R : radii) {
    if (R >= d.diameter()) {
      out.push_back(1.0);
      continue;
    }
    const int m = static_cast<int>(std::ceil(R / h));
    std::vector<std::array<int, 2>> stencil;
    for (int dj = -m; dj <= m; ++dj)
      for (int di = -m; di <= m; ++di)
        if (std::hypot(di * h, dj * h) < R) stencil.push_back({di, dj});
    double best = 0.0;
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (!centre[static_cast<std::size_t>(j) * nx + i]) continue;
        double s = 0.0;
        for (const auto& [di, dj] : stencil) {
          const int a = i + di, b = j + dj;
          if (a < 0 || b < 0 || a >= nx || b >= ny) continue;
          s += mass[static_cast<std::size_t>(b) * nx + a];
        }
        best = std::max(best, s);
      }
    out.push_back(std::min(best, 1.0));
  }
  return out;
}

}  // namespace mfe
