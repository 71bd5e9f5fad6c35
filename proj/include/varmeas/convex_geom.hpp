#pragma once

// Convex bodies in R^d (d <= 3) by vertex lists, support functions, the
// Hausdorff metric on a direction grid and the grid embedding C -> s(., C).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace varmeas {

inline constexpr std::size_t kMaxBodyDim = 3;

// ---------------------------------------------------------------------------
// Exact orientation predicate (expansion arithmetic).

namespace exact {

inline void two_sum(double a, double b, double& x, double& y) {
  x = a + b;
  const double bv = x - a;
  const double av = x - bv;
  y = (a - av) + (b - bv);
}

inline void two_product(double a, double b, double& x, double& y) {
  x = a * b;
  y = std::fma(a, b, -x);
}

// Adds b into the nonoverlapping expansion e (increasing magnitude).
inline void grow_expansion(std::vector<double>& e, double b) {
  double q = b;
  for (auto& c : e) {
    double h;
    two_sum(q, c, q, h);
    c = h;
  }
  e.push_back(q);
}

inline int expansion_sign(const std::vector<double>& e) {
  for (auto it = e.rbegin(); it != e.rend(); ++it)
    if (*it != 0.0) return *it > 0.0 ? 1 : -1;
  return 0;
}

/// Sign of the determinant | b-a, c-a |: +1 for a left turn a -> b -> c.
inline int orient2d(const double* a, const double* b, const double* c) {
  const double prods[6][2] = {{a[0], b[1]}, {a[0], -c[1]}, {b[0], c[1]},
                              {b[0], -a[1]}, {c[0], a[1]}, {c[0], -b[1]}};
  std::vector<double> e;
  e.reserve(13);
  for (const auto& p : prods) {
    double hi, lo;
    two_product(p[0], p[1], hi, lo);
    grow_expansion(e, lo);
    grow_expansion(e, hi);
  }
  return expansion_sign(e);
}

}  // namespace exact

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

using Vec3 = std::array<double, 3>;

inline Vec3 sub3(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 cross3(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm3(const Vec3& a) { return std::sqrt(dot3(a, a)); }

}  // namespace detail

/// 2D convex hull (Andrew's monotone chain, exact turns). Returns the extreme
/// points counter-clockwise; collinear and duplicate points are dropped.
inline std::vector<std::array<double, 2>> convex_hull_2d(std::vector<std::array<double, 2>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() <= 2) return pts;
  std::vector<std::array<double, 2>> h(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && exact::orient2d(h[k - 2].data(), h[k - 1].data(), p.data()) <= 0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    const auto& p = pts[i];
    while (k >= t && exact::orient2d(h[k - 2].data(), h[k - 1].data(), p.data()) <= 0) --k;
    h[k++] = p;
  }
  h.resize(k - 1);
  return h;
}

struct Hull3 {
  std::vector<detail::Vec3> points;             // extreme points
  std::vector<std::array<std::size_t, 3>> faces;  // indices into points, outward CCW; empty if degenerate
};

/// 3D convex hull, incremental with relative tolerance 1e-12. Flat inputs
/// fall back to the planar hull (no faces), collinear ones to the two ends.
inline Hull3 convex_hull_3d(std::vector<detail::Vec3> pts) {
  using detail::Vec3;
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  Hull3 out;
  if (pts.size() <= 1) {
    out.points = pts;
    return out;
  }
  double scale = 0.0;
  for (const auto& p : pts)
    for (double c : p) scale = std::max(scale, std::abs(c));
  const double eps = 1e-12 * std::max(scale, 1e-300);

  std::size_t i1 = 0;
  double best = -1.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = detail::norm3(detail::sub3(pts[i], pts[0]));
    if (d > best) best = d, i1 = i;
  }
  const Vec3 axis = detail::sub3(pts[i1], pts[0]);
  std::size_t i2 = 0;
  best = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = detail::norm3(detail::cross3(axis, detail::sub3(pts[i], pts[0]))) / detail::norm3(axis);
    if (d > best) best = d, i2 = i;
  }
  if (best <= eps) {  // collinear: keep the two extremes along the axis
    auto key = [&](const Vec3& p) { return detail::dot3(detail::sub3(p, pts[0]), axis); };
    auto [lo, hi] = std::minmax_element(pts.begin(), pts.end(), [&](auto& a, auto& b) { return key(a) < key(b); });
    out.points = {*lo, *hi};
    return out;
  }
  Vec3 normal = detail::cross3(axis, detail::sub3(pts[i2], pts[0]));
  const double nn = detail::norm3(normal);
  for (double& c : normal) c /= nn;
  std::size_t i3 = 0;
  best = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = std::abs(detail::dot3(normal, detail::sub3(pts[i], pts[0])));
    if (d > best) best = d, i3 = i;
  }
  if (best <= eps) {  // coplanar: planar hull in an orthonormal basis of the plane
    Vec3 e1 = axis;
    const double n1 = detail::norm3(e1);
    for (double& c : e1) c /= n1;
    const Vec3 e2 = detail::cross3(normal, e1);
    std::vector<std::array<double, 2>> flat;
    std::map<std::array<double, 2>, Vec3> back;
    for (const auto& p : pts) {
      const auto d = detail::sub3(p, pts[0]);
      std::array<double, 2> q{detail::dot3(d, e1), detail::dot3(d, e2)};
      flat.push_back(q);
      back.emplace(q, p);
    }
    for (const auto& q : convex_hull_2d(flat)) out.points.push_back(back.at(q));
    return out;
  }

  struct Face {
    std::array<std::size_t, 3> v;
    Vec3 n;
    double off;
    bool alive;
  };
  std::vector<Face> faces;
  auto make_face = [&](std::size_t a, std::size_t b, std::size_t c) {
    Vec3 n = detail::cross3(detail::sub3(pts[b], pts[a]), detail::sub3(pts[c], pts[a]));
    const double l = detail::norm3(n);
    if (l > 0.0)
      for (double& x : n) x /= l;
    return Face{{a, b, c}, n, detail::dot3(n, pts[a]), true};
  };
  Vec3 centroid{};
  for (std::size_t i : {std::size_t{0}, i1, i2, i3})
    for (int k = 0; k < 3; ++k) centroid[k] += pts[i][k] / 4.0;
  auto add_oriented = [&](std::size_t a, std::size_t b, std::size_t c) {
    Face f = make_face(a, b, c);
    if (detail::dot3(f.n, centroid) - f.off > 0.0) f = make_face(a, c, b);
    faces.push_back(f);
  };
  add_oriented(0, i1, i2);
  add_oriented(0, i1, i3);
  add_oriented(0, i2, i3);
  add_oriented(i1, i2, i3);

  for (std::size_t p = 0; p < pts.size(); ++p) {
    if (p == 0 || p == i1 || p == i2 || p == i3) continue;
    std::vector<std::size_t> visible;
    for (std::size_t f = 0; f < faces.size(); ++f)
      if (faces[f].alive && detail::dot3(faces[f].n, pts[p]) - faces[f].off > eps) visible.push_back(f);
    if (visible.empty()) continue;
    std::map<std::pair<std::size_t, std::size_t>, int> edges;
    for (std::size_t f : visible) {
      const auto& v = faces[f].v;
      for (int k = 0; k < 3; ++k) ++edges[{v[k], v[(k + 1) % 3]}];
    }
    std::vector<std::pair<std::size_t, std::size_t>> horizon;
    for (const auto& [e, cnt] : edges)
      if (!edges.count({e.second, e.first})) horizon.push_back(e);
    for (std::size_t f : visible) faces[f].alive = false;
    for (const auto& [a, b] : horizon) faces.push_back(make_face(a, b, p));
  }

  std::map<std::size_t, std::size_t> remap;
  for (const auto& f : faces) {
    if (!f.alive) continue;
    std::array<std::size_t, 3> idx{};
    for (int k = 0; k < 3; ++k) {
      auto [it, fresh] = remap.emplace(f.v[k], out.points.size());
      if (fresh) out.points.push_back(pts[f.v[k]]);
      idx[k] = it->second;
    }
    out.faces.push_back(idx);
  }
  return out;
}

// ---------------------------------------------------------------------------

/// conv(vertices) in R^d, 1 <= d <= 3. Vertices are stored flat, point-major.
class Polytope {
 public:
  Polytope() = default;
  Polytope(std::size_t dim, std::vector<double> flat_vertices) : dim_(dim), v_(std::move(flat_vertices)) {
    detail::require(dim_ >= 1 && dim_ <= kMaxBodyDim, "Polytope: dimension must be 1, 2 or 3");
    detail::require(!v_.empty() && v_.size() % dim_ == 0, "Polytope: need a nonempty list of d-dimensional vertices");
    for (double x : v_) detail::require(std::isfinite(x), "Polytope: coordinates must be finite");
  }

  static Polytope from_points(const std::vector<std::vector<double>>& pts) {
    detail::require(!pts.empty(), "Polytope: need at least one vertex");
    const std::size_t d = pts.front().size();
    std::vector<double> flat;
    for (const auto& p : pts) {
      if (p.size() != d) throw DimensionMismatch("Polytope: vertices of different dimensions");
      flat.insert(flat.end(), p.begin(), p.end());
    }
    return Polytope(d, std::move(flat));
  }
  static Polytope point(std::vector<double> p) {
    const std::size_t d = p.size();
    return Polytope(d, std::move(p));
  }
  static Polytope interval(double a, double b) {
    detail::require(a <= b, "Polytope::interval: need a <= b");
    return Polytope(1, {a, b});
  }
  /// Axis-parallel box with corners lo, hi.
  static Polytope box(const std::vector<double>& lo, const std::vector<double>& hi) {
    if (lo.size() != hi.size()) throw DimensionMismatch("Polytope::box: corner dimensions differ");
    const std::size_t d = lo.size();
    std::vector<double> flat;
    for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask)
      for (std::size_t k = 0; k < d; ++k) flat.push_back((mask >> k) & 1u ? hi[k] : lo[k]);
    return Polytope(d, std::move(flat));
  }
  static Polytope origin(std::size_t d) { return Polytope(d, std::vector<double>(d, 0.0)); }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t vertex_count() const noexcept { return v_.size() / dim_; }
  std::span<const double> vertex(std::size_t i) const { return std::span<const double>(v_).subspan(i * dim_, dim_); }
  std::span<const double> flat() const noexcept { return v_; }

  /// max |x| over the body (distance of the farthest point from the origin).
  double radius() const {
    double r = 0.0;
    for (std::size_t i = 0; i < vertex_count(); ++i) r = std::max(r, detail::norm(vertex(i)));
    return r;
  }

  Polytope scaled(double lambda) const {
    detail::require(lambda >= 0.0, "Polytope::scaled: factor must be >= 0");
    if (lambda == 0.0) return origin(dim_);
    auto w = v_;
    for (double& x : w) x *= lambda;
    return Polytope(dim_, std::move(w));
  }

  Polytope translated(std::span<const double> t) const {
    if (t.size() != dim_) throw DimensionMismatch("Polytope::translated: dimension mismatch");
    auto w = v_;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += t[i % dim_];
    return Polytope(dim_, std::move(w));
  }

  /// Extreme-point representation (exact for d <= 2, tolerance 1e-12 for d = 3).
  Polytope canonical() const {
    if (dim_ == 1) {
      const auto [lo, hi] = std::minmax_element(v_.begin(), v_.end());
      return *lo == *hi ? Polytope(1, {*lo}) : Polytope(1, {*lo, *hi});
    }
    std::vector<double> flat;
    if (dim_ == 2) {
      std::vector<std::array<double, 2>> pts;
      for (std::size_t i = 0; i < vertex_count(); ++i) pts.push_back({vertex(i)[0], vertex(i)[1]});
      for (const auto& p : convex_hull_2d(pts)) flat.insert(flat.end(), p.begin(), p.end());
    } else {
      std::vector<detail::Vec3> pts;
      for (std::size_t i = 0; i < vertex_count(); ++i) pts.push_back({vertex(i)[0], vertex(i)[1], vertex(i)[2]});
      for (const auto& p : convex_hull_3d(pts).points) flat.insert(flat.end(), p.begin(), p.end());
    }
    return Polytope(dim_, std::move(flat));
  }

 private:
  std::size_t dim_ = 1;
  std::vector<double> v_{0.0};
};

/// s(x, C) = max over vertices of <x, v>. x need not be a unit vector.
inline double support(std::span<const double> x, const Polytope& c) {
  if (x.size() != c.dim()) throw DimensionMismatch("support: direction dimension != body dimension");
  double s = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.vertex_count(); ++i) s = std::max(s, detail::dot(x, c.vertex(i)));
  return s;
}

inline double support(std::initializer_list<double> x, const Polytope& c) {
  return support(std::span<const double>(x.begin(), x.size()), c);
}

// ---------------------------------------------------------------------------

/// Finite set of unit directions with a mesh angle theta: every unit vector
/// lies within angle theta of some grid direction.
class DirectionGrid {
 public:
  DirectionGrid(std::string id, std::size_t dim, std::vector<double> flat_dirs, double mesh_angle)
      : id_(std::move(id)), dim_(dim), dirs_(std::move(flat_dirs)), theta_(mesh_angle) {
    detail::require(dim_ >= 1 && dim_ <= kMaxBodyDim, "DirectionGrid: dimension must be 1, 2 or 3");
    detail::require(!dirs_.empty() && dirs_.size() % dim_ == 0, "DirectionGrid: malformed direction list");
    for (std::size_t k = 0; k < size(); ++k)
      detail::require(std::abs(detail::norm(dir(k)) - 1.0) < 1e-12, "DirectionGrid: directions must be unit vectors");
  }

  /// {+1, -1}; exact (theta = 0).
  static DirectionGrid line() { return DirectionGrid("d1", 1, {1.0, -1.0}, 0.0); }

  /// M equiangular directions on the circle, theta = pi / M.
  static DirectionGrid circle(std::size_t m) {
    detail::require(m >= 3, "DirectionGrid::circle: need at least 3 directions");
    std::vector<double> flat;
    for (std::size_t k = 0; k < m; ++k) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(m);
      double c = std::cos(a), s = std::sin(a);
      // exact axis directions where the angle is a multiple of pi/2
      if (4 * k % m == 0) {
        const std::size_t q = 4 * k / m;
        c = q == 0 ? 1.0 : q == 2 ? -1.0 : 0.0;
        s = q == 1 ? 1.0 : q == 3 ? -1.0 : 0.0;
      }
      flat.push_back(c);
      flat.push_back(s);
    }
    return DirectionGrid("d2-equiangular-" + std::to_string(m), 2, std::move(flat),
                         std::numbers::pi / static_cast<double>(m));
  }

  /// Fibonacci sphere with M points; theta is the covering radius computed
  /// from the spherical Delaunay triangulation (hull facets of the points).
  static DirectionGrid sphere(std::size_t m) {
    detail::require(m >= 8, "DirectionGrid::sphere: need at least 8 directions");
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::vector<detail::Vec3> pts;
    std::vector<double> flat;
    for (std::size_t k = 0; k < m; ++k) {
      const double z = 1.0 - (2.0 * static_cast<double>(k) + 1.0) / static_cast<double>(m);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * static_cast<double>(k);
      detail::Vec3 p{r * std::cos(phi), r * std::sin(phi), z};
      const double l = detail::norm3(p);
      for (double& c : p) c /= l;
      pts.push_back(p);
      flat.insert(flat.end(), p.begin(), p.end());
    }
    const auto hull = convex_hull_3d(pts);
    if (hull.points.size() != m) throw InvariantBreach("DirectionGrid::sphere: grid point lost in hull");
    double theta = 0.0;
    for (const auto& f : hull.faces) {
      const auto& a = hull.points[f[0]];
      auto n = detail::cross3(detail::sub3(hull.points[f[1]], a), detail::sub3(hull.points[f[2]], a));
      const double l = detail::norm3(n);
      for (double& c : n) c /= l;
      theta = std::max(theta, std::acos(std::clamp(detail::dot3(n, a), -1.0, 1.0)));
    }
    return DirectionGrid("d3-fibonacci-" + std::to_string(m), 3, std::move(flat), theta + 1e-9);
  }

  /// Default grid per dimension: d=1 exact pair, d=2 360 directions, d=3 1000.
  static std::shared_ptr<const DirectionGrid> standard(std::size_t d) {
    static std::mutex mu;
    static std::map<std::size_t, std::shared_ptr<const DirectionGrid>> cache;
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(d); it != cache.end()) return it->second;
    std::shared_ptr<const DirectionGrid> g;
    switch (d) {
      case 1: g = std::make_shared<const DirectionGrid>(line()); break;
      case 2: g = std::make_shared<const DirectionGrid>(circle(360)); break;
      case 3: g = std::make_shared<const DirectionGrid>(sphere(1000)); break;
      default: throw InvalidArgument("DirectionGrid::standard: dimension must be 1, 2 or 3");
    }
    cache.emplace(d, g);
    return g;
  }

  const std::string& id() const noexcept { return id_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dirs_.size() / dim_; }
  std::span<const double> dir(std::size_t k) const { return std::span<const double>(dirs_).subspan(k * dim_, dim_); }
  double mesh_angle() const noexcept { return theta_; }

 private:
  std::string id_;
  std::size_t dim_;
  std::vector<double> dirs_;
  double theta_;
};

using GridPtr = std::shared_ptr<const DirectionGrid>;

/// Support values of a body sampled on a grid. `sublinear` is false for
/// signed combinations, which need not be support functions of any body.
struct SupportVector {
  GridPtr grid;
  std::vector<double> values;
  bool sublinear = true;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t k) const { return values.at(k); }

  friend SupportVector operator+(const SupportVector& a, const SupportVector& b) {
    require_same_grid(a, b, "SupportVector::+");
    SupportVector r = a;
    for (std::size_t k = 0; k < r.values.size(); ++k) r.values[k] += b.values[k];
    r.sublinear = a.sublinear && b.sublinear;
    return r;
  }
  friend SupportVector operator*(double lambda, const SupportVector& a) {
    SupportVector r = a;
    for (double& v : r.values) v *= lambda;
    r.sublinear = a.sublinear && lambda >= 0.0;
    return r;
  }

  static void require_same_grid(const SupportVector& a, const SupportVector& b, const char* where) {
    if (!a.grid || !b.grid || a.grid->id() != b.grid->id())
      throw DimensionMismatch(std::string(where) + ": support vectors on different grids");
  }
};

/// sup-norm distance on the grid.
inline double grid_distance(const SupportVector& a, const SupportVector& b) {
  SupportVector::require_same_grid(a, b, "grid_distance");
  double d = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) d = std::max(d, std::abs(a.values[k] - b.values[k]));
  return d;
}

inline SupportVector zero_support(const GridPtr& grid) { return {grid, std::vector<double>(grid->size(), 0.0), true}; }

/// i(C): the support function of C on the grid.
inline SupportVector radstrom_embed(const Polytope& c, const GridPtr& grid) {
  if (c.dim() != grid->dim()) throw DimensionMismatch("radstrom_embed: body and grid dimensions differ");
  SupportVector sv{grid, std::vector<double>(grid->size()), true};
  for (std::size_t k = 0; k < grid->size(); ++k) sv.values[k] = support(grid->dir(k), c);
  return sv;
}

struct HausdorffBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Bracket on d_H(C, D): lower is the grid sup of |s(u,C) - s(u,D)|, upper
/// adds (|C| + |D|) * theta since support functions are Lipschitz in u with
/// constant the body radius. Exact for d = 1.
inline HausdorffBounds hausdorff(const Polytope& c, const Polytope& d, const DirectionGrid& grid) {
  if (c.dim() != d.dim() || c.dim() != grid.dim()) throw DimensionMismatch("hausdorff: dimension mismatch");
  HausdorffBounds h;
  for (std::size_t k = 0; k < grid.size(); ++k)
    h.lower = std::max(h.lower, std::abs(support(grid.dir(k), c) - support(grid.dir(k), d)));
  h.upper = h.lower + 2.0 * std::max(c.radius(), d.radius()) * grid.mesh_angle();
  return h;
}

inline HausdorffBounds hausdorff(const Polytope& c, const Polytope& d) {
  return hausdorff(c, d, *DirectionGrid::standard(c.dim()));
}

/// sum_k lambda_k C_k as a body; lambda_k >= 0 and d <= 2.
inline Polytope minkowski_body(std::span<const double> coeffs, std::span<const Polytope> bodies) {
  detail::require(!bodies.empty() && coeffs.size() == bodies.size(),
                  "minkowski_body: need matching nonempty coefficient and body lists");
  const std::size_t d = bodies.front().dim();
  for (const auto& b : bodies)
    if (b.dim() != d) throw DimensionMismatch("minkowski_body: bodies of different dimensions");
  for (double l : coeffs)
    if (!(l >= 0.0)) throw InvalidArgument("minkowski_body: negative coefficient has no body-valued result");
  if (d > 2) throw InvalidArgument("minkowski_body: vertex representation only for d <= 2; use minkowski_support");
  Polytope acc = Polytope::origin(d);
  for (std::size_t k = 0; k < bodies.size(); ++k) {
    const Polytope term = bodies[k].scaled(coeffs[k]).canonical();
    std::vector<double> flat;
    for (std::size_t i = 0; i < acc.vertex_count(); ++i)
      for (std::size_t j = 0; j < term.vertex_count(); ++j)
        for (std::size_t c = 0; c < d; ++c) flat.push_back(acc.vertex(i)[c] + term.vertex(j)[c]);
    acc = Polytope(d, std::move(flat)).canonical();
  }
  return acc;
}

/// sum_k lambda_k i(C_k) on the grid; signed coefficients allowed and flagged.
inline SupportVector minkowski_support(std::span<const double> coeffs, std::span<const Polytope> bodies,
                                       const GridPtr& grid) {
  detail::require(coeffs.size() == bodies.size(), "minkowski_support: coefficient and body counts differ");
  SupportVector acc = zero_support(grid);
  for (std::size_t k = 0; k < bodies.size(); ++k) acc = acc + coeffs[k] * radstrom_embed(bodies[k], grid);
  return acc;
}

}  // namespace varmeas
