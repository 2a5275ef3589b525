#pragma once

// Residual, linearization and Newton solvers for
//
//   -Delta u = lambda ( e^u / ∫e^u  +  sigma*gamma * e^{gamma u} / ∫e^{gamma u} )  in Omega,
//          u = 0 on the boundary.
//
// The nonlocal normalizations make the Jacobian a sparse operator plus one
// rank-one correction per intensity. Newton systems are solved as one sparse
// bordered system in which the two rank-one couplings (and, for continuation,
// the lambda column and a constraint row) appear as extra unknowns.

#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mfe/errors.hpp"
#include "mfe/grid.hpp"

namespace mfe {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double k8Pi = 8.0 * std::numbers::pi;

/// Physical parameters (lambda, sigma, gamma).
struct Params {
  double lambda = 0.0;
  double sigma = 0.0;
  double gamma = 0.0;
};

inline std::vector<std::string> check_params(const Params& p) {
  std::vector<std::string> out;
  if (!(p.gamma >= -1.0 && p.gamma < 1.0)) out.push_back("gamma out of [-1,1)");
  if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda)) out.push_back("lambda must be finite and >= 0");
  if (!(p.sigma >= 0.0) || !std::isfinite(p.sigma)) out.push_back("sigma must be finite and >= 0");
  return out;
}

inline void require_valid(const Params& p) {
  if (auto v = check_params(p); !v.empty()) throw ValidationError("params: " + v.front());
}

/// Probability-measure form: P = tau*delta_1 + (1-tau)*delta_gamma with scale lambda_tilde.
struct TauForm {
  double tau = 1.0;
  double lambda_tilde = 0.0;
};

inline Params convert_tau_form(double tau, double lambda_tilde, double gamma = 0.0) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("convert_tau_form: tau must lie in (0,1]");
  if (!(lambda_tilde >= 0.0)) throw ValidationError("convert_tau_form: lambda_tilde must be >= 0");
  return {lambda_tilde * tau, (1.0 - tau) / tau, gamma};
}

inline TauForm to_tau_form(const Params& p) { return {1.0 / (1.0 + p.sigma), p.lambda * (1.0 + p.sigma)}; }

/// log ∫ e^{alpha u}, overflow-safe (the boundary contributes e^0).
inline double log_partition(const Field& u, double alpha) {
  const DiscreteDomain& d = u.domain();
  const double shift = std::max(0.0, (alpha * u.values()).maxCoeff());
  const double s = d.weights().dot((alpha * u.values().array() - shift).exp().matrix()) +
                   d.boundary_weight() * std::exp(alpha * u.trace() - shift);
  return shift + std::log(s);
}

/// Normalized density e^{alpha u} / ∫ e^{alpha u}. The same max-shift is used in
/// numerator and denominator; the trace carries the boundary value.
inline Field density(const Field& u, double alpha) {
  const DiscreteDomain& d = u.domain();
  const double shift = u.size() ? std::max(alpha * u.trace(), (alpha * u.values()).maxCoeff()) : alpha * u.trace();
  Eigen::VectorXd e = (alpha * u.values().array() - shift).exp().matrix();
  const double eb = std::exp(alpha * u.trace() - shift);
  const double z = d.weights().dot(e) + d.boundary_weight() * eb;
  return Field(d, e / z, eb / z);
}

/// Right-hand side without lambda: rho_1 + sigma*gamma*rho_gamma.
inline Field source_term(const Field& u, const Params& p) {
  Field r = density(u, 1.0);
  Field rg = density(u, p.gamma);
  r.values() += (p.sigma * p.gamma) * rg.values();
  r.set_trace(r.trace() + p.sigma * p.gamma * rg.trace());
  return r;
}

/// F(u) = -Delta u - lambda (rho_1 + sigma gamma rho_gamma).
inline Field residual(const Field& u, const Params& p) {
  Field au = apply_laplacian(u);
  const Field r1 = density(u, 1.0);
  const Field rg = density(u, p.gamma);
  au.values() -= p.lambda * (r1.values() + (p.sigma * p.gamma) * rg.values());
  return au;
}

/// Residual of the one-intensity problem -Delta u = lambda e^u / ∫e^u.
inline Field standard_mfe_residual(const Field& u, double lambda) {
  Field au = apply_laplacian(u);
  const Field r1 = density(u, 1.0);
  au.values() -= lambda * r1.values();
  return au;
}

/// Residual of the sinh-Poisson problem -Delta u = lambda (rho_1 - sigma rho_{-1}).
inline Field sinh_poisson_residual(const Field& u, double lambda, double sigma) {
  Field au = apply_laplacian(u);
  const Field r1 = density(u, 1.0);
  const Field rm = density(u, -1.0);
  au.values() -= lambda * (r1.values() + (-sigma) * rm.values());
  return au;
}

/// Scale used for relative residual tests: lambda * (|rho_1|_inf + sigma|gamma| |rho_gamma|_inf), at least 1.
inline double residual_scale(const Field& u, const Params& p) {
  const double a = density(u, 1.0).values().cwiseAbs().maxCoeff();
  const double b = density(u, p.gamma).values().cwiseAbs().maxCoeff();
  return std::max(1.0, p.lambda * (a + p.sigma * std::abs(p.gamma) * b));
}

/// Jacobian-vector product dF(u)[v]. v is a perturbation with zero boundary value.
inline Field jacobian_apply(const Field& u, const Params& p, const Field& v) {
  u.check_same(v);
  const DiscreteDomain& d = u.domain();
  Field out = apply_laplacian(v);
  const Field r1 = density(u, 1.0);
  const Field rg = density(u, p.gamma);
  const double m1 = d.weights().dot(r1.values().cwiseProduct(v.values()));
  const double mg = d.weights().dot(rg.values().cwiseProduct(v.values()));
  out.values() -= p.lambda * (r1.values().cwiseProduct(v.values()) - m1 * r1.values());
  out.values() -= (p.lambda * p.sigma * p.gamma * p.gamma) * (rg.values().cwiseProduct(v.values()) - mg * rg.values());
  return out;
}

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 50;
  double min_damping = std::ldexp(1.0, -20);
  /// Compare |F|_inf against tol * residual_scale (true) or tol (false).
  bool relative = true;
};

struct NewtonReport {
  bool converged = false;
  int iterations = 0;
  double final_residual_norm = std::numeric_limits<double>::infinity();
  double residual_scale = 1.0;
  double tolerance = 0.0;
  std::vector<double> damping_history;
  std::string message;
};

/// Linear constraint row c.du + d*dlambda = rhs appended to a Newton system.
struct Border {
  Eigen::VectorXd c;
  double d = 0.0;
  double rhs = 0.0;
};

/// Factorizes and solves linearized systems on one domain. Reuses the sparsity
/// analysis across calls with the same shape. Not thread-safe; one per solve.
class NewtonLinearSolver {
 public:
  struct Solution {
    Eigen::VectorXd du;
    double dlambda = 0.0;
  };

  /// Solve J du (+ F_lambda dlambda) = rhs, with the optional border row.
  /// rhs is in residual units (same as F).
  Solution solve(const Field& u, const Params& p, const Eigen::VectorXd& rhs, const Border* border) {
    const DiscreteDomain& d = u.domain();
    const auto N = static_cast<Eigen::Index>(d.size());
    const bool bordered = border != nullptr;
    const Eigen::Index n = N + 2 + (bordered ? 1 : 0);
    const Field r1 = density(u, 1.0);
    const Field rg = density(u, p.gamma);
    const Eigen::VectorXd& w = d.weights();
    const double cg = p.lambda * p.sigma * p.gamma * p.gamma;

    using T = Eigen::Triplet<double>;
    std::vector<T> trip;
    trip.reserve(static_cast<std::size_t>(d.stiffness().nonZeros() + 6 * N + 8));
    const auto& K = d.stiffness();
    for (Eigen::Index row = 0; row < N; ++row) {
      const double diag = -w[row] * (p.lambda * r1[row] + cg * rg[row]);
      for (DiscreteDomain::SparseMatrix::InnerIterator it(K, row); it; ++it) {
        double val = it.value();
        if (it.col() == row) val += diag;
        trip.emplace_back(row, it.col(), val);
      }
      trip.emplace_back(row, N, w[row] * p.lambda * r1[row]);
      trip.emplace_back(row, N + 1, w[row] * cg * rg[row]);
      trip.emplace_back(N, row, w[row] * r1[row]);
      trip.emplace_back(N + 1, row, w[row] * rg[row]);
      if (bordered) {
        trip.emplace_back(row, N + 2, -w[row] * (r1[row] + p.sigma * p.gamma * rg[row]));
        trip.emplace_back(N + 2, row, border->c[row]);
      }
    }
    trip.emplace_back(N, N, -1.0);
    trip.emplace_back(N + 1, N + 1, -1.0);
    if (bordered) trip.emplace_back(N + 2, N + 2, border->d);

    Eigen::SparseMatrix<double> M(n, n);
    M.setFromTriplets(trip.begin(), trip.end());
    M.makeCompressed();
    if (!analyzed_ || n != n_) {
      lu_.analyzePattern(M);
      analyzed_ = true;
      n_ = n;
    }
    lu_.factorize(M);
    if (lu_.info() != Eigen::Success)
      throw NumericalError("newton: sparse LU factorization failed (singular linearization)");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b.head(N) = rhs.cwiseProduct(w);
    if (bordered) b[N + 2] = border->rhs;
    Eigen::VectorXd x = lu_.solve(b);
    if (lu_.info() != Eigen::Success || !x.allFinite()) throw NumericalError("newton: sparse LU solve failed");
    // One step of iterative refinement guards against pivot growth near blow-up.
    x += lu_.solve(b - M * x);
    Solution s;
    s.du = x.head(N);
    s.dlambda = bordered ? x[N + 2] : 0.0;
    return s;
  }

 private:
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  bool analyzed_ = false;
  Eigen::Index n_ = 0;
};

struct NewtonResult {
  Field u;
  NewtonReport report;
};

/// Damped Newton at fixed parameters. Backtracking halves the step until the
/// residual sup-norm strictly decreases; gives up below opts.min_damping.
inline NewtonResult newton_solve(const Field& u0, const Params& p, const NewtonOptions& opts = {},
                                 NewtonLinearSolver* workspace = nullptr) {
  require_valid(p);
  if (!(opts.tol > 0.0)) throw ValidationError("newton_solve: tol must be positive");
  if (!u0.all_finite()) throw ValidationError("newton_solve: initial guess has non-finite entries");
  NewtonLinearSolver local;
  NewtonLinearSolver& ls = workspace ? *workspace : local;
  NewtonResult res{u0, {}};
  res.u.set_trace(0.0);
  Field F = residual(res.u, p);
  double fn = F.sup_norm();
  auto& rep = res.report;
  rep.damping_history.clear();
  for (;;) {
    rep.residual_scale = opts.relative ? residual_scale(res.u, p) : 1.0;
    rep.tolerance = opts.tol * rep.residual_scale;
    rep.final_residual_norm = fn;
    if (fn <= rep.tolerance) {
      rep.converged = true;
      return res;
    }
    if (rep.iterations >= opts.max_iter) {
      rep.message = "newton: no convergence within max_iter";
      return res;
    }
    const auto step = ls.solve(res.u, p, -F.values(), nullptr);
    double t = 1.0;
    bool accepted = false;
    while (t >= opts.min_damping) {
      Field trial = res.u;
      trial.values() += t * step.du;
      if (trial.all_finite()) {
        Field Ft = residual(trial, p);
        const double ftn = Ft.sup_norm();
        if (ftn < fn) {
          res.u = std::move(trial);
          F = std::move(Ft);
          fn = ftn;
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    ++rep.iterations;
    if (!accepted) {
      rep.message = "newton: line search failed to reduce the residual";
      return res;
    }
    rep.damping_history.push_back(t);
  }
}

struct BorderedResult {
  Field u;
  double lambda = 0.0;
  NewtonReport report;
};

/// Newton on the extended unknown (u, lambda) with one extra linear equation
///   c.(u - u_ref) + d (lambda - lambda_ref) = 0.
/// Used for pseudo-arclength correction and height-pinned solves.
inline BorderedResult bordered_newton(const Field& u0, double lambda0, const Params& p, const Eigen::VectorXd& c,
                                      double d, const Field& u_ref, double lambda_ref, const NewtonOptions& opts,
                                      NewtonLinearSolver& ls) {
  BorderedResult res{u0, lambda0, {}};
  res.u.set_trace(0.0);
  auto params_at = [&](double lam) {
    Params q = p;
    q.lambda = lam;
    return q;
  };
  auto constraint = [&](const Field& u, double lam) {
    return c.dot(u.values() - u_ref.values()) + d * (lam - lambda_ref);
  };
  Field F = residual(res.u, params_at(res.lambda));
  double g = constraint(res.u, res.lambda);
  auto merit = [](const Field& f, double gv, double scale) { return f.sup_norm() / scale + std::abs(gv); };
  auto& rep = res.report;
  for (;;) {
    const Params q = params_at(res.lambda);
    rep.residual_scale = opts.relative ? residual_scale(res.u, q) : 1.0;
    rep.tolerance = opts.tol * rep.residual_scale;
    rep.final_residual_norm = F.sup_norm();
    if (rep.final_residual_norm <= rep.tolerance && std::abs(g) <= opts.tol) {
      rep.converged = true;
      return res;
    }
    if (rep.iterations >= opts.max_iter) {
      rep.message = "bordered newton: no convergence within max_iter";
      return res;
    }
    Border b{c, d, -g};
    NewtonLinearSolver::Solution step;
    try {
      step = ls.solve(res.u, q, -F.values(), &b);
    } catch (const NumericalError& e) {
      rep.message = e.what();
      return res;
    }
    const double m0 = merit(F, g, rep.residual_scale);
    double t = 1.0;
    bool accepted = false;
    while (t >= opts.min_damping) {
      Field trial = res.u;
      trial.values() += t * step.du;
      const double lam = res.lambda + t * step.dlambda;
      if (trial.all_finite() && lam >= 0.0) {
        Field Ft = residual(trial, params_at(lam));
        const double gt = constraint(trial, lam);
        if (merit(Ft, gt, rep.residual_scale) < m0) {
          res.u = std::move(trial);
          res.lambda = lam;
          F = std::move(Ft);
          g = gt;
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    ++rep.iterations;
    if (!accepted) {
      rep.message = "bordered newton: line search failed to reduce the residual";
      return res;
    }
    rep.damping_history.push_back(t);
  }
}

/// Solve for (u, lambda) with u pinned to `height` at interior node `node`.
/// Useful where lambda(u_max) is well conditioned but u(lambda) is not.
inline BorderedResult solve_at_height(const Field& u0, double lambda0, const Params& p, std::size_t node,
                                      double height, const NewtonOptions& opts = {}) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(u0.size()));
  c[static_cast<Eigen::Index>(node)] = 1.0;
  Field ref(u0.domain());
  ref[node] = height;
  NewtonLinearSolver ls;
  return bordered_newton(u0, lambda0, p, c, 0.0, ref, 0.0, opts, ls);
}

/// u = u_plus - u_minus with u_plus = G*[lambda rho_1], u_minus = G*[lambda sigma |gamma| rho_gamma]
/// and the weight h = e^{-u_minus} (h = 1 on the boundary).
struct Splitting {
  Field u_plus;
  Field u_minus;
  Field weight_h;
  double reconstruction_error = 0.0;
};

inline Splitting split_solution(const Field& u, const Params& p) {
  if (!(p.gamma < 0.0)) throw ValidationError("split_solution: requires gamma < 0 (asymmetric sinh case)");
  require_valid(p);
  Field r1 = density(u, 1.0);
  Field rg = density(u, p.gamma);
  r1 *= p.lambda;
  rg *= p.lambda * p.sigma * std::abs(p.gamma);
  Splitting s{solve_poisson(r1), solve_poisson(rg), Field(u.domain()), 0.0};
  s.weight_h = Field(u.domain(), (-s.u_minus.values().array()).exp().matrix(), 1.0);
  s.reconstruction_error = (s.u_plus.values() - s.u_minus.values() - u.values()).cwiseAbs().maxCoeff();
  return s;
}

}  // namespace mfe
