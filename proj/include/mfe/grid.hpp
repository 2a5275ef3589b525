#pragma once

// Structured grids for the mean field solver: grid-aligned rectangles (with an
// optional rectangular hole), a staircase-masked disk, and a 1-D radial disk.
//
// Every domain carries two node sets. Interior nodes hold the unknowns; the
// zero-Dirichlet boundary nodes only contribute quadrature mass. Fields store
// interior values plus a single "trace" value that the field takes on all
// boundary nodes (0 for stream functions, 1/Z for densities, ...).

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mfe/errors.hpp"

namespace mfe {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains_closed(Point p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  bool contains_open(Point p) const { return p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1; }
  /// Euclidean distance from p to the closed rectangle (0 inside).
  double distance_to(Point p) const {
    const double dx = std::max({x0 - p.x, 0.0, p.x - x1});
    const double dy = std::max({y0 - p.y, 0.0, p.y - y1});
    return std::hypot(dx, dy);
  }
};

/// Distance between two closed rectangles (0 when they overlap or touch).
inline double rect_gap(const Rect& a, const Rect& b) {
  const double dx = std::max({a.x0 - b.x1, 0.0, b.x0 - a.x1});
  const double dy = std::max({a.y0 - b.y1, 0.0, b.y0 - a.y1});
  return std::hypot(dx, dy);
}

enum class Shape { rectangle, rectangle_with_hole, disk };

/// Geometry request for build_domain. Rectangles occupy [0,width]x[0,height];
/// disks are centered at the origin.
struct DomainSpec {
  Shape shape = Shape::rectangle;
  double width = 1.0;
  double height = 1.0;
  Rect hole{};
  double radius = 1.0;
  bool radial = true;
  double spacing = 1.0 / 64.0;

  static DomainSpec rectangle(double w, double h, double spacing) {
    DomainSpec s;
    s.shape = Shape::rectangle;
    s.width = w;
    s.height = h;
    s.spacing = spacing;
    return s;
  }
  static DomainSpec rectangle_with_hole(double w, double h, Rect hole, double spacing) {
    DomainSpec s = rectangle(w, h, spacing);
    s.shape = Shape::rectangle_with_hole;
    s.hole = hole;
    return s;
  }
  static DomainSpec disk(double radius, bool radial, double spacing) {
    DomainSpec s;
    s.shape = Shape::disk;
    s.radius = radius;
    s.radial = radial;
    s.spacing = spacing;
    return s;
  }
};

inline std::string shape_tag(const DomainSpec& s) {
  switch (s.shape) {
    case Shape::rectangle: return "rectangle";
    case Shape::rectangle_with_hole: return "rectangle_with_hole";
    case Shape::disk: return s.radial ? "disk_radial" : "disk_masked";
  }
  return "unknown";
}

namespace detail {

inline bool grid_aligned(double length, double h, long* count = nullptr) {
  const double n = std::round(length / h);
  if (count) *count = static_cast<long>(n);
  return n >= 1 && std::abs(n * h - length) <= 1e-9 * std::max(1.0, std::abs(length));
}

}  // namespace detail

/// Every violated geometric constraint of `s`, as human-readable messages.
/// Empty when the domain can be built.
inline std::vector<std::string> check_domain_spec(const DomainSpec& s) {
  std::vector<std::string> out;
  const double h = s.spacing;
  if (!(h > 0.0) || !std::isfinite(h)) {
    out.push_back("domain.spacing must be a positive finite number");
    return out;
  }
  if (s.shape == Shape::disk) {
    if (!(s.radius > 0.0) || !std::isfinite(s.radius)) {
      out.push_back("domain.radius must be positive");
      return out;
    }
    if (s.radial && !detail::grid_aligned(s.radius, h))
      out.push_back("domain.radius must be an integer multiple of domain.spacing in radial mode");
    if (s.radial ? s.radius / h < 9.5 : std::pow(s.radius / h, 2) * std::numbers::pi < 9.5)
      out.push_back("domain.spacing too coarse: fewer than 9 interior nodes");
    return out;
  }
  if (!(s.width > 0.0) || !(s.height > 0.0)) {
    out.push_back("domain.width and domain.height must be positive");
    return out;
  }
  long nx = 0, ny = 0;
  if (!detail::grid_aligned(s.width, h, &nx))
    out.push_back("domain.width must be an integer multiple of domain.spacing");
  if (!detail::grid_aligned(s.height, h, &ny))
    out.push_back("domain.height must be an integer multiple of domain.spacing");
  if ((nx - 1) * (ny - 1) < 9) out.push_back("domain.spacing too coarse: fewer than 9 interior nodes");
  if (s.shape == Shape::rectangle_with_hole) {
    const Rect& r = s.hole;
    if (!(r.x1 > r.x0) || !(r.y1 > r.y0)) {
      out.push_back("domain.hole must have positive width and height");
      return out;
    }
    if (!(r.x0 > 0.0 && r.y0 > 0.0 && r.x1 < s.width && r.y1 < s.height)) {
      out.push_back("domain.hole must lie strictly inside the outer rectangle (hole touches or crosses the boundary)");
      return out;
    }
    for (double c : {r.x0, r.y0, r.x1, r.y1})
      if (!detail::grid_aligned(c, h)) {
        out.push_back("domain.hole edges must lie on grid lines");
        break;
      }
    const double clear = std::min({r.x0, r.y0, s.width - r.x1, s.height - r.y1});
    if (clear < 2.0 * h - 1e-12)
      out.push_back("domain.hole too close to the outer boundary: clearance below two grid spacings");
  }
  return out;
}

enum class NodeKind : std::int8_t { exterior = 0, boundary = 1, interior = 2 };

struct BoundaryNode {
  int i = 0, j = 0;
  Point p;
  double weight = 0.0;
};

class Field;
class DiscreteDomain;
DiscreteDomain build_domain(const DomainSpec& spec);
Field solve_poisson(const Field& f);

/// Immutable discretized domain. Cheap to copy: copies share one build.
class DiscreteDomain {
 public:
  using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  DiscreteDomain() = default;

  const DomainSpec& spec() const { return impl_->spec; }
  double spacing() const { return impl_->spec.spacing; }
  bool radial() const { return impl_->spec.shape == Shape::disk && impl_->spec.radial; }
  std::string shape_tag() const { return mfe::shape_tag(impl_->spec); }

  /// Lattice size (nodes per axis, boundary included). Radial grids have ny = 1.
  int nx() const { return impl_->nx; }
  int ny() const { return impl_->ny; }
  Point lattice_origin() const { return impl_->origin; }
  Point lattice_point(int i, int j) const {
    return {impl_->origin.x + i * spacing(), impl_->origin.y + j * spacing()};
  }

  /// Number of interior nodes (unknowns).
  std::size_t size() const { return impl_->ij.size(); }
  std::array<int, 2> lattice_index(std::size_t k) const { return impl_->ij[k]; }
  Point node(std::size_t k) const { return lattice_point(impl_->ij[k][0], impl_->ij[k][1]); }
  NodeKind kind_at(int i, int j) const {
    if (i < 0 || j < 0 || i >= nx() || j >= ny()) return NodeKind::exterior;
    return impl_->kind[static_cast<std::size_t>(j) * nx() + i];
  }
  /// Interior index of lattice node (i, j), or -1.
  long index_at(int i, int j) const {
    if (i < 0 || j < 0 || i >= nx() || j >= ny()) return -1;
    return impl_->index[static_cast<std::size_t>(j) * nx() + i];
  }

  const Eigen::VectorXd& weights() const { return impl_->weights; }
  const std::vector<BoundaryNode>& boundary_nodes() const { return impl_->boundary; }
  double boundary_weight() const { return impl_->boundary_weight; }
  /// Sum of all quadrature weights (area of the discrete domain).
  double area() const { return impl_->area; }
  double exact_area() const;
  double diameter() const;
  const Eigen::VectorXd& boundary_distance() const { return impl_->bdist; }
  /// Distance from p to the boundary; negative outside the domain.
  double distance_to_boundary(Point p) const;
  bool contains(Point p) const { return distance_to_boundary(p) > 0.0; }
  /// Axis-aligned bounding box of the closed domain.
  Rect bounding_box() const;

  /// Weighted stiffness K = W (-Delta_h), symmetric positive definite.
  const SparseMatrix& stiffness() const { return impl_->stiffness; }

  bool same_as(const DiscreteDomain& o) const { return impl_ == o.impl_; }
  explicit operator bool() const { return static_cast<bool>(impl_); }

 private:
  struct Impl {
    DomainSpec spec;
    int nx = 0, ny = 0;
    Point origin;
    std::vector<std::array<int, 2>> ij;
    std::vector<NodeKind> kind;
    std::vector<long> index;
    Eigen::VectorXd weights;
    std::vector<BoundaryNode> boundary;
    double boundary_weight = 0.0;
    double area = 0.0;
    Eigen::VectorXd bdist;
    SparseMatrix stiffness;

    mutable std::once_flag factor_once;
    mutable std::unique_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> factor;
  };

  const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>& poisson_factor() const;

  std::shared_ptr<const Impl> impl_;

  friend DiscreteDomain build_domain(const DomainSpec& spec);
  friend Field solve_poisson(const Field& f);
};

inline double DiscreteDomain::exact_area() const {
  const DomainSpec& s = spec();
  switch (s.shape) {
    case Shape::rectangle: return s.width * s.height;
    case Shape::rectangle_with_hole: return s.width * s.height - s.hole.width() * s.hole.height();
    case Shape::disk: return std::numbers::pi * s.radius * s.radius;
  }
  return 0.0;
}

inline double DiscreteDomain::diameter() const {
  const DomainSpec& s = spec();
  return s.shape == Shape::disk ? 2.0 * s.radius : std::hypot(s.width, s.height);
}

inline Rect DiscreteDomain::bounding_box() const {
  const DomainSpec& s = spec();
  if (s.shape == Shape::disk) return {-s.radius, -s.radius, s.radius, s.radius};
  return {0.0, 0.0, s.width, s.height};
}

inline double DiscreteDomain::distance_to_boundary(Point p) const {
  const DomainSpec& s = spec();
  if (s.shape == Shape::disk) return s.radius - std::hypot(p.x, p.y);
  const double outer = std::min({p.x, s.width - p.x, p.y, s.height - p.y});
  if (s.shape == Shape::rectangle) return outer;
  if (s.hole.contains_closed(p)) {
    const double inside = std::min({p.x - s.hole.x0, s.hole.x1 - p.x, p.y - s.hole.y0, s.hole.y1 - p.y});
    return -inside;
  }
  return std::min(outer, s.hole.distance_to(p));
}

inline const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>& DiscreteDomain::poisson_factor() const {
  std::call_once(impl_->factor_once, [this] {
    auto f = std::make_unique<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>();
    Eigen::SparseMatrix<double> k = impl_->stiffness;
    f->compute(k);
    if (f->info() != Eigen::Success) throw NumericalError("poisson: Cholesky factorization of the stiffness failed");
    impl_->factor = std::move(f);
  });
  return *impl_->factor;
}

/// Build the discrete domain; throws ValidationError listing every violation.
inline DiscreteDomain build_domain(const DomainSpec& spec) {
  if (auto v = check_domain_spec(spec); !v.empty()) {
    std::string msg = "build_domain: ";
    for (std::size_t k = 0; k < v.size(); ++k) msg += (k ? "; " : "") + v[k];
    throw ValidationError(msg);
  }
  auto impl = std::make_shared<DiscreteDomain::Impl>();
  impl->spec = spec;
  const double h = spec.spacing;
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> trip;

  if (spec.shape == Shape::disk && spec.radial) {
    // Finite volumes on [0, R]: node i sits at r = i h, node n = R/h is the boundary.
    long n = 0;
    detail::grid_aligned(spec.radius, h, &n);
    impl->nx = static_cast<int>(n) + 1;
    impl->ny = 1;
    impl->origin = {0.0, 0.0};
    impl->kind.assign(impl->nx, NodeKind::interior);
    impl->kind[n] = NodeKind::boundary;
    impl->index.assign(impl->nx, -1);
    const std::size_t N = static_cast<std::size_t>(n);
    impl->weights.resize(static_cast<Eigen::Index>(N));
    impl->bdist.resize(static_cast<Eigen::Index>(N));
    const double pi = std::numbers::pi;
    for (std::size_t i = 0; i < N; ++i) {
      impl->ij.push_back({static_cast<int>(i), 0});
      impl->index[i] = static_cast<long>(i);
      const double r = static_cast<double>(i) * h;
      impl->weights[static_cast<Eigen::Index>(i)] = i == 0 ? pi * h * h / 4.0 : 2.0 * pi * r * h;
      impl->bdist[static_cast<Eigen::Index>(i)] = spec.radius - r;
    }
    for (std::size_t i = 0; i < N; ++i) {
      const double r_out = (static_cast<double>(i) + 0.5) * h;
      const double t_out = 2.0 * pi * r_out / h;
      const auto ii = static_cast<int>(i);
      trip.emplace_back(ii, ii, t_out);
      if (i + 1 < N) {
        trip.emplace_back(ii, ii + 1, -t_out);
        trip.emplace_back(ii + 1, ii, -t_out);
        trip.emplace_back(ii + 1, ii + 1, t_out);
      }
    }
    impl->boundary_weight = pi * spec.radius * spec.radius - impl->weights.sum();
    impl->boundary.push_back({static_cast<int>(n), 0, {spec.radius, 0.0}, impl->boundary_weight});
  } else {
    const bool disk = spec.shape == Shape::disk;
    long cx = 0, cy = 0;
    if (disk) {
      cx = cy = 2 * static_cast<long>(std::ceil(spec.radius / h - 1e-9));
      impl->origin = {-static_cast<double>(cx / 2) * h, -static_cast<double>(cy / 2) * h};
    } else {
      detail::grid_aligned(spec.width, h, &cx);
      detail::grid_aligned(spec.height, h, &cy);
      impl->origin = {0.0, 0.0};
    }
    impl->nx = static_cast<int>(cx) + 1;
    impl->ny = static_cast<int>(cy) + 1;
    const std::size_t total = static_cast<std::size_t>(impl->nx) * impl->ny;
    impl->kind.assign(total, NodeKind::exterior);
    impl->index.assign(total, -1);
    DiscreteDomain probe;
    probe.impl_ = impl;
    auto interior = [&](int i, int j) {
      const Point p = probe.lattice_point(i, j);
      if (disk) return p.x * p.x + p.y * p.y < spec.radius * spec.radius * (1.0 - 1e-12);
      if (i == 0 || j == 0 || i == impl->nx - 1 || j == impl->ny - 1) return false;
      const double tol = 1e-9 * h;
      if (spec.shape == Shape::rectangle_with_hole && p.x >= spec.hole.x0 - tol && p.x <= spec.hole.x1 + tol &&
          p.y >= spec.hole.y0 - tol && p.y <= spec.hole.y1 + tol)
        return false;
      return true;
    };
    for (int j = 0; j < impl->ny; ++j)
      for (int i = 0; i < impl->nx; ++i)
        if (interior(i, j)) {
          const std::size_t at = static_cast<std::size_t>(j) * impl->nx + i;
          impl->kind[at] = NodeKind::interior;
          impl->index[at] = static_cast<long>(impl->ij.size());
          impl->ij.push_back({i, j});
        }
    const std::size_t N = impl->ij.size();
    impl->weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(N), h * h);
    impl->bdist.resize(static_cast<Eigen::Index>(N));
    for (std::size_t k = 0; k < N; ++k) impl->bdist[static_cast<Eigen::Index>(k)] = probe.distance_to_boundary(probe.node(k));

    // Boundary nodes: non-interior lattice nodes whose dual cell meets the domain.
    // Weight = area of (dual cell) ∩ domain, by midpoint sub-sampling.
    constexpr int sub = 16;
    auto inside_exact = [&](Point p) {
      if (disk) return p.x * p.x + p.y * p.y < spec.radius * spec.radius;
      if (p.x <= 0.0 || p.y <= 0.0 || p.x >= spec.width || p.y >= spec.height) return false;
      if (spec.shape == Shape::rectangle_with_hole && spec.hole.contains_open(p)) return false;
      return true;
    };
    for (int j = 0; j < impl->ny; ++j)
      for (int i = 0; i < impl->nx; ++i) {
        const std::size_t at = static_cast<std::size_t>(j) * impl->nx + i;
        if (impl->kind[at] == NodeKind::interior) continue;
        const Point c = probe.lattice_point(i, j);
        int hits = 0;
        for (int a = 0; a < sub; ++a)
          for (int b = 0; b < sub; ++b) {
            const Point q{c.x + ((a + 0.5) / sub - 0.5) * h, c.y + ((b + 0.5) / sub - 0.5) * h};
            hits += inside_exact(q) ? 1 : 0;
          }
        bool touches_interior = false;
        for (auto [di, dj] : {std::array<int, 2>{1, 0}, {-1, 0}, {0, 1}, {0, -1}})
          touches_interior = touches_interior || probe.index_at(i + di, j + dj) >= 0;
        if (hits == 0 && !touches_interior) continue;
        impl->kind[at] = NodeKind::boundary;
        const double w = h * h * static_cast<double>(hits) / (sub * sub);
        impl->boundary.push_back({i, j, c, w});
        impl->boundary_weight += w;
      }

    // 5-point stencil scaled by the node area: K = h^2 * (-Delta_h).
    trip.reserve(5 * N);
    for (std::size_t k = 0; k < N; ++k) {
      const auto [i, j] = impl->ij[k];
      const auto kk = static_cast<int>(k);
      trip.emplace_back(kk, kk, 4.0);
      for (auto [di, dj] : {std::array<int, 2>{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
        const long nb = probe.index_at(i + di, j + dj);
        if (nb >= 0) trip.emplace_back(kk, static_cast<int>(nb), -1.0);
      }
    }
  }
  const auto N = static_cast<Eigen::Index>(impl->ij.size());
  impl->stiffness.resize(N, N);
  impl->stiffness.setFromTriplets(trip.begin(), trip.end());
  impl->stiffness.makeCompressed();
  impl->area = impl->weights.sum() + impl->boundary_weight;
  DiscreteDomain out;
  out.impl_ = std::move(impl);
  return out;
}

/// Scalar grid function: one value per interior node plus a uniform boundary trace.
class Field {
 public:
  Field() = default;
  explicit Field(DiscreteDomain dom, double trace = 0.0)
      : dom_(std::move(dom)), values_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dom_.size()))), trace_(trace) {}
  Field(DiscreteDomain dom, Eigen::VectorXd values, double trace = 0.0)
      : dom_(std::move(dom)), values_(std::move(values)), trace_(trace) {
    if (static_cast<std::size_t>(values_.size()) != dom_.size())
      throw ValidationError("Field: value count does not match the domain's interior node count");
  }

  /// Sample f at interior nodes; the trace is f's (assumed constant) boundary value.
  template <class F>
  static Field from_function(const DiscreteDomain& dom, F&& f, double trace = 0.0) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dom.size()));
    for (std::size_t k = 0; k < dom.size(); ++k) v[static_cast<Eigen::Index>(k)] = f(dom.node(k));
    return Field(dom, std::move(v), trace);
  }

  const DiscreteDomain& domain() const { return dom_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  double trace() const { return trace_; }
  void set_trace(double t) { trace_ = t; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t k) const { return values_[static_cast<Eigen::Index>(k)]; }
  double& operator[](std::size_t k) { return values_[static_cast<Eigen::Index>(k)]; }

  /// Max/min over the closure (the trace counts as a value).
  double max() const { return std::max(values_.size() ? values_.maxCoeff() : trace_, trace_); }
  double min() const { return std::min(values_.size() ? values_.minCoeff() : trace_, trace_); }
  double sup_norm() const { return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0; }
  bool all_finite() const { return values_.allFinite() && std::isfinite(trace_); }

  Field& operator+=(const Field& o) {
    check_same(o);
    values_ += o.values_;
    trace_ += o.trace_;
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_same(o);
    values_ -= o.values_;
    trace_ -= o.trace_;
    return *this;
  }
  Field& operator*=(double s) {
    values_ *= s;
    trace_ *= s;
    return *this;
  }
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }

  void check_same(const Field& o) const {
    if (!dom_.same_as(o.dom_)) throw ValidationError("Field: operands live on different domains");
  }

 private:
  DiscreteDomain dom_;
  Eigen::VectorXd values_;
  double trace_ = 0.0;
};

/// Discrete -Delta with the zero Dirichlet data folded in.
inline Field apply_laplacian(const Field& u) {
  const DiscreteDomain& d = u.domain();
  Eigen::VectorXd ku = d.stiffness() * u.values();
  return Field(d, ku.cwiseQuotient(d.weights()));
}

/// Discrete Green's operator: returns u with -Delta_h u = f and u = 0 on the boundary.
inline Field solve_poisson(const Field& f) {
  const DiscreteDomain& d = f.domain();
  if (!f.all_finite()) throw ValidationError("solve_poisson: source has non-finite entries");
  const auto& llt = d.poisson_factor();
  const Eigen::VectorXd rhs = f.values().cwiseProduct(d.weights());
  Eigen::VectorXd u = llt.solve(rhs);
  const double fn = rhs.norm();
  double rel = fn > 0 ? (d.stiffness() * u - rhs).norm() / fn : (d.stiffness() * u).norm();
  for (int refine = 0; refine < 3 && rel > 1e-12; ++refine) {
    u += llt.solve(rhs - d.stiffness() * u);
    rel = fn > 0 ? (d.stiffness() * u - rhs).norm() / fn : (d.stiffness() * u).norm();
  }
  if (!(rel <= 1e-10)) {
    std::ostringstream msg;
    msg << "solve_poisson: relative residual " << rel << " above 1e-10";
    throw NumericalError(msg.str());
  }
  return Field(d, std::move(u));
}

/// Quadrature of a field over the closed domain: interior values plus the trace
/// on boundary nodes.
inline double integrate(const Field& g) {
  const DiscreteDomain& d = g.domain();
  return d.weights().dot(g.values()) + d.boundary_weight() * g.trace();
}

/// Quadrature of per-interior-node values with a given uniform boundary value.
inline double integrate(const DiscreteDomain& d, const Eigen::VectorXd& g, double boundary_value = 0.0) {
  return d.weights().dot(g) + d.boundary_weight() * boundary_value;
}

/// Quadrature of a point function, evaluated at interior and boundary nodes.
template <class F>
double integrate_function(const DiscreteDomain& d, F&& f) {
  double s = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) s += d.weights()[static_cast<Eigen::Index>(k)] * f(d.node(k));
  for (const auto& b : d.boundary_nodes()) s += b.weight * f(b.p);
  return s;
}

/// Weighted inner product over interior nodes (the discrete L2 pairing).
inline double inner(const Field& a, const Field& b) {
  a.check_same(b);
  return a.values().cwiseProduct(b.values()).dot(a.domain().weights());
}

// ---------------------------------------------------------------------------
// Field dumps: "nx ny spacing shape-tag" then one "i j x y value" row per
// interior node. Readers ignore trailing columns.

inline void write_field(std::ostream& os, const Field& u) {
  const DiscreteDomain& d = u.domain();
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d %d %.17g %s\n", d.nx(), d.ny(), d.spacing(), d.shape_tag().c_str());
  os << buf;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto [i, j] = d.lattice_index(k);
    const Point p = d.node(k);
    std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g %.17g\n", i, j, p.x, p.y, u[k]);
    os << buf;
  }
}

struct FieldDump {
  int nx = 0, ny = 0;
  double spacing = 0.0;
  std::string shape_tag;
  struct Row {
    int i = 0, j = 0;
    double x = 0.0, y = 0.0, value = 0.0;
  };
  std::vector<Row> rows;
};

inline FieldDump read_field_dump(std::istream& is) {
  FieldDump d;
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("field dump: missing header line");
  {
    std::istringstream hs(line);
    if (!(hs >> d.nx >> d.ny >> d.spacing >> d.shape_tag))
      throw ValidationError("field dump: header must be 'nx ny spacing shape-tag'");
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream rs(line);
    FieldDump::Row r;
    if (!(rs >> r.i >> r.j >> r.x >> r.y >> r.value))
      throw ValidationError("field dump: malformed row at line " + std::to_string(lineno));
    d.rows.push_back(r);
  }
  return d;
}

/// Place dump rows onto `dom` by lattice index; nodes absent from the dump stay 0.
inline Field field_from_dump(const FieldDump& dump, const DiscreteDomain& dom) {
  if (dump.nx != dom.nx() || dump.ny != dom.ny() || dump.shape_tag != dom.shape_tag())
    throw ValidationError("field dump: lattice or shape does not match the domain");
  Field f(dom);
  for (const auto& r : dump.rows) {
    const long k = dom.index_at(r.i, r.j);
    if (k < 0) throw ValidationError("field dump: row (" + std::to_string(r.i) + "," + std::to_string(r.j) + ") is not an interior node");
    f[static_cast<std::size_t>(k)] = r.value;
  }
  return f;
}

}  // namespace mfe
