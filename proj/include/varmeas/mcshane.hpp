#pragma once

// Gauge (McShane) integration on [0,1] for step functions against
// piecewise-constant densities: gauges, subordinate partitions, Riemann sums,
// certified gauges, (m_n)-equi-integrability and the McShane limit theorems
// (vector valued, and multivalued through the grid embedding).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "convex_geom.hpp"
#include "families.hpp"
#include "integrability.hpp"
#include "report.hpp"

namespace varmeas {

enum class VectorNorm { euclidean, max_abs };

inline double vector_norm(std::span<const double> v, VectorNorm kind) {
  if (kind == VectorNorm::max_abs) {
    double s = 0.0;
    for (double x : v) s = std::max(s, std::abs(x));
    return s;
  }
  return detail::norm(v);
}

namespace detail {

inline void require_grid(const std::vector<double>& breaks, const char* where) {
  if (breaks.size() < 2 || breaks.front() != 0.0 || breaks.back() != 1.0)
    throw InvalidArgument(std::string(where) + ": breakpoints must start at 0 and end at 1");
  for (std::size_t k = 1; k < breaks.size(); ++k)
    if (!(breaks[k] > breaks[k - 1])) throw InvalidArgument(std::string(where) + ": breakpoints must increase");
}

// Index of the cell [b_k, b_{k+1}) containing t; the last cell is closed.
inline std::size_t cell_index(const std::vector<double>& breaks, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("point outside [0,1]");
  const auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
  const auto k = static_cast<std::size_t>(it - breaks.begin());
  return std::min(k, breaks.size() - 1) - 1;
}

inline std::vector<double> merge_breaks(std::initializer_list<const std::vector<double>*> lists) {
  std::vector<double> out;
  for (const auto* l : lists) out.insert(out.end(), l->begin(), l->end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

/// Right-continuous step function on [0,1] with R^d values per cell.
class StepFn {
 public:
  StepFn() : StepFn({0.0, 1.0}, {{0.0}}) {}
  StepFn(std::vector<double> breaks, std::vector<std::vector<double>> values, VectorNorm norm = VectorNorm::euclidean)
      : breaks_(std::move(breaks)), norm_(norm) {
    detail::require_grid(breaks_, "StepFn");
    detail::require(values.size() + 1 == breaks_.size(), "StepFn: need one value per cell");
    dim_ = values.front().size();
    detail::require(dim_ >= 1, "StepFn: values must have dimension >= 1");
    for (const auto& v : values) {
      if (v.size() != dim_) throw DimensionMismatch("StepFn: values of different dimensions");
      for (double x : v) detail::require(std::isfinite(x), "StepFn: values must be finite");
      values_.insert(values_.end(), v.begin(), v.end());
    }
  }

  static StepFn scalar(std::vector<double> breaks, const std::vector<double>& values) {
    std::vector<std::vector<double>> v;
    for (double x : values) v.push_back({x});
    return StepFn(std::move(breaks), std::move(v));
  }
  static StepFn constant(std::vector<double> c) { return StepFn({0.0, 1.0}, {std::move(c)}); }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t cells() const noexcept { return breaks_.size() - 1; }
  const std::vector<double>& breaks() const noexcept { return breaks_; }
  VectorNorm norm_kind() const noexcept { return norm_; }
  std::span<const double> value(std::size_t cell) const {
    return std::span<const double>(values_).subspan(cell * dim_, dim_);
  }
  std::span<const double> at(double t) const { return value(detail::cell_index(breaks_, t)); }
  double norm(std::span<const double> v) const { return vector_norm(v, norm_); }

  double sup_norm() const {
    double s = 0.0;
    for (std::size_t k = 0; k < cells(); ++k) s = std::max(s, norm(value(k)));
    return s;
  }
  /// Breakpoints where the value actually changes.
  std::vector<double> jumps() const {
    std::vector<double> j;
    for (std::size_t k = 1; k < cells(); ++k) {
      const auto a = value(k - 1), b = value(k);
      if (!std::equal(a.begin(), a.end(), b.begin())) j.push_back(breaks_[k]);
    }
    return j;
  }

  StepFn with_norm(VectorNorm n) const {
    StepFn f = *this;
    f.norm_ = n;
    return f;
  }

 private:
  std::vector<double> breaks_;
  std::size_t dim_ = 1;
  std::vector<double> values_;
  VectorNorm norm_ = VectorNorm::euclidean;
};

/// f + c g on the merged grid.
inline StepFn step_axpy(const StepFn& f, double c, const StepFn& g) {
  if (f.dim() != g.dim()) throw DimensionMismatch("step_axpy: dimension mismatch");
  const auto br = detail::merge_breaks({&f.breaks(), &g.breaks()});
  std::vector<std::vector<double>> vals;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const double mid = 0.5 * (br[k] + br[k + 1]);
    const auto a = f.at(mid), b = g.at(mid);
    std::vector<double> v(f.dim());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + c * b[i];
    vals.push_back(std::move(v));
  }
  return StepFn(br, std::move(vals), f.norm_kind());
}

/// Measure on [0,1] with a piecewise-constant nonnegative density.
class DensityMeasure {
 public:
  DensityMeasure() : DensityMeasure({0.0, 1.0}, {1.0}) {}
  DensityMeasure(std::vector<double> breaks, std::vector<double> densities)
      : breaks_(std::move(breaks)), rho_(std::move(densities)) {
    detail::require_grid(breaks_, "DensityMeasure");
    detail::require(rho_.size() + 1 == breaks_.size(), "DensityMeasure: need one density per cell");
    for (double r : rho_) detail::require(std::isfinite(r) && r >= 0.0, "DensityMeasure: densities must be >= 0");
  }
  static DensityMeasure lebesgue() { return DensityMeasure(); }

  const std::vector<double>& breaks() const noexcept { return breaks_; }
  const std::vector<double>& densities() const noexcept { return rho_; }
  double density_at(double t) const { return rho_[detail::cell_index(breaks_, t)]; }
  double max_density() const { return *std::max_element(rho_.begin(), rho_.end()); }

  /// m([a, b)).
  double mass(double a, double b) const {
    a = std::max(a, 0.0);
    b = std::min(b, 1.0);
    if (!(b > a)) return 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < rho_.size(); ++k) {
      const double lo = std::max(a, breaks_[k]), hi = std::min(b, breaks_[k + 1]);
      if (hi > lo) s += rho_[k] * (hi - lo);
    }
    return s;
  }
  double total() const { return mass(0.0, 1.0); }

 private:
  std::vector<double> breaks_;
  std::vector<double> rho_;
};

/// (1 - a) m + a mu on the merged grid.
inline DensityMeasure density_combine(const DensityMeasure& m, const DensityMeasure& mu, double a) {
  const auto br = detail::merge_breaks({&m.breaks(), &mu.breaks()});
  std::vector<double> rho;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const double mid = 0.5 * (br[k] + br[k + 1]);
    rho.push_back((1.0 - a) * m.density_at(mid) + a * mu.density_at(mid));
  }
  return DensityMeasure(br, std::move(rho));
}

/// |m1 - m2|([0,1]).
inline double density_tv_distance(const DensityMeasure& m1, const DensityMeasure& m2) {
  const auto br = detail::merge_breaks({&m1.breaks(), &m2.breaks()});
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const double mid = 0.5 * (br[k] + br[k + 1]);
    s += std::abs(m1.density_at(mid) - m2.density_at(mid)) * (br[k + 1] - br[k]);
  }
  return s;
}

/// sup over the interval algebra generated by the breakpoints of both
/// measures of |m1(A) - m2(A)|.
inline double density_sup_set_gap(const DensityMeasure& m1, const DensityMeasure& m2) {
  const auto br = detail::merge_breaks({&m1.breaks(), &m2.breaks()});
  double pos = 0.0, neg = 0.0;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const double mid = 0.5 * (br[k] + br[k + 1]);
    const double c = (m1.density_at(mid) - m2.density_at(mid)) * (br[k + 1] - br[k]);
    (c > 0.0 ? pos : neg) += std::abs(c);
  }
  return std::max(pos, neg);
}

/// [a, b) with a < b; b = 1 includes the point 1.
struct Interval {
  double a = 0.0;
  double b = 1.0;
};
using IntervalSet = std::vector<Interval>;

inline double measure_of(const DensityMeasure& m, const IntervalSet& s) {
  double t = 0.0;
  for (const auto& iv : s) t += m.mass(iv.a, iv.b);
  return t;
}

/// Exact integral over A of f dm (componentwise).
inline std::vector<double> integral_over(const StepFn& f, const DensityMeasure& m, const IntervalSet& s) {
  const auto br = detail::merge_breaks({&f.breaks(), &m.breaks()});
  std::vector<double> out(f.dim(), 0.0);
  for (const auto& iv : s) {
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
      const double lo = std::max(iv.a, br[k]), hi = std::min(iv.b, br[k + 1]);
      if (!(hi > lo)) continue;
      const double mid = 0.5 * (br[k] + br[k + 1]);
      const double w = m.density_at(mid) * (hi - lo);
      const auto v = f.at(mid);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i] * w;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

/// Piecewise-constant gauge: Delta(t) = (t - r(t), t + r(t)) cut to [0,1],
/// r constant on each cell [b_k, b_{k+1}) (last cell closed).
class Gauge {
 public:
  Gauge() : Gauge({0.0, 1.0}, {1.0}) {}
  Gauge(std::vector<double> breaks, std::vector<double> radii) : breaks_(std::move(breaks)), radii_(std::move(radii)) {
    detail::require_grid(breaks_, "Gauge");
    detail::require(radii_.size() + 1 == breaks_.size(), "Gauge: need one radius per cell");
    min_radius_ = std::numeric_limits<double>::infinity();
    for (double r : radii_) {
      detail::require(std::isfinite(r) && r > 0.0, "Gauge: radii must be positive");
      min_radius_ = std::min(min_radius_, r);
    }
  }
  static Gauge constant(double r) { return Gauge({0.0, 1.0}, {r}); }

  const std::vector<double>& breaks() const noexcept { return breaks_; }
  const std::vector<double>& radii() const noexcept { return radii_; }
  double min_radius() const noexcept { return min_radius_; }
  double radius_at(double t) const { return radii_[detail::cell_index(breaks_, t)]; }

  /// [a, b) inside Delta(t); b = 1 is treated as the closed end of [0,1].
  bool interval_inside(double t, double a, double b) const {
    const double r = radius_at(t);
    if (!(a > t - r)) return false;
    return b >= 1.0 ? t + r > 1.0 : b <= t + r;
  }

  /// Finest common refinement: r(t) = min over gauges.
  static Gauge pointwise_min(const std::vector<Gauge>& gs) {
    detail::require(!gs.empty(), "Gauge::pointwise_min: empty list");
    Gauge acc = gs.front();
    for (std::size_t i = 1; i < gs.size(); ++i) {
      const auto br = detail::merge_breaks({&acc.breaks_, &gs[i].breaks_});
      std::vector<double> r;
      for (std::size_t k = 0; k + 1 < br.size(); ++k) r.push_back(std::min(acc.radius_at(br[k]), gs[i].radius_at(br[k])));
      acc = Gauge(br, std::move(r));
    }
    return acc;
  }

 private:
  std::vector<double> breaks_;
  std::vector<double> radii_;
  double min_radius_ = 1.0;
};

struct TaggedCell {
  IntervalSet set;
  double tag = 0.0;
};

/// Finite McShane partition: disjoint cells covering [0,1], tags anywhere.
struct TaggedPartition {
  std::vector<TaggedCell> cells;
};

/// A_i inside Delta(t_i) for every cell.
inline bool is_subordinate(const TaggedPartition& p, const Gauge& g) {
  for (const auto& c : p.cells) {
    if (!(c.tag >= 0.0 && c.tag <= 1.0)) return false;
    for (const auto& iv : c.set)
      if (!g.interval_inside(c.tag, iv.a, iv.b)) return false;
  }
  return true;
}

/// Cells are disjoint and cover [0,1].
inline bool covers_unit_interval(const TaggedPartition& p) {
  std::vector<Interval> all;
  for (const auto& c : p.cells) all.insert(all.end(), c.set.begin(), c.set.end());
  std::sort(all.begin(), all.end(), [](const Interval& x, const Interval& y) { return x.a < y.a; });
  double at = 0.0;
  for (const auto& iv : all) {
    if (iv.a != at || !(iv.b > iv.a)) return false;
    at = iv.b;
  }
  return at == 1.0;
}

/// Midpoint-tagged partition of [lo, hi) whose cells stay inside gauge cells.
inline std::vector<TaggedCell> subordinate_cover(const Gauge& g, double lo, double hi, std::size_t refinement) {
  detail::require(refinement >= 1, "subordinate_cover: refinement must be >= 1");
  std::vector<TaggedCell> out;
  const auto& br = g.breaks();
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const double a = std::max(lo, br[k]), b = std::min(hi, br[k + 1]);
    if (!(b > a)) continue;
    const double r = g.radii()[k];
    const auto pieces = refinement * (static_cast<std::size_t>(std::floor((b - a) / r)) + 1);
    for (std::size_t j = 0; j < pieces; ++j) {
      const double x = j == 0 ? a : a + (b - a) * static_cast<double>(j) / static_cast<double>(pieces);
      const double y = j + 1 == pieces ? b : a + (b - a) * static_cast<double>(j + 1) / static_cast<double>(pieces);
      out.push_back({{{x, y}}, 0.5 * (x + y)});
    }
  }
  return out;
}

/// Cousin-type construction: every gauge cell is cut into
/// refinement * (floor(len / r) + 1) equal pieces tagged at their midpoints.
inline TaggedPartition subordinate_partition(const Gauge& g, std::size_t refinement = 1) {
  return {subordinate_cover(g, 0.0, 1.0, refinement)};
}

/// Random partition subordinate to g: cut points and tags drawn at random,
/// tags allowed outside their cells, adjacent cells occasionally merged.
inline TaggedPartition random_subordinate_partition(const Gauge& g, Rng& rng) {
  TaggedPartition p;
  double a = 0.0;
  while (a < 1.0) {
    double t = a;
    if (rng.coin()) {
      const double r = g.radius_at(a);
      for (int attempt = 0; attempt < 20; ++attempt) {
        const double c = std::clamp(a + rng.uniform(-r, r), 0.0, 1.0);
        const double rc = g.radius_at(c);
        if (c - rc < a && c + rc > a) {
          t = c;
          break;
        }
      }
    }
    const double reach = t + g.radius_at(t);
    double b;
    if (reach > 1.0 && rng.uniform() < 0.3) {
      b = 1.0;
    } else {
      const double top = std::min(reach, 1.0);
      b = a + (top - a) * rng.uniform(0.05, 0.999);
      if (b >= 1.0) b = reach > 1.0 ? 1.0 : std::nextafter(1.0, 0.0);
      if (!(b > a)) b = std::min(1.0, std::nextafter(a, 2.0));
    }
    p.cells.push_back({{{a, b}}, t});
    a = b;
  }
  // merge a cell into the previous one when the union still fits its gauge ball
  TaggedPartition merged;
  for (auto& c : p.cells) {
    if (!merged.cells.empty() && rng.uniform() < 0.25) {
      auto& prev = merged.cells.back();
      bool fits = true;
      for (const auto& iv : c.set) fits = fits && g.interval_inside(prev.tag, iv.a, iv.b);
      if (fits) {
        prev.set.insert(prev.set.end(), c.set.begin(), c.set.end());
        continue;
      }
    }
    merged.cells.push_back(std::move(c));
  }
  return merged;
}

/// sum_i f(t_i) m(A_i).
inline std::vector<double> riemann_sum(const StepFn& f, const DensityMeasure& m, const TaggedPartition& p) {
  std::vector<double> s(f.dim(), 0.0);
  for (const auto& c : p.cells) {
    if (!(c.tag >= 0.0 && c.tag <= 1.0)) throw InvalidArgument("riemann_sum: tag outside [0,1]");
    const double w = measure_of(m, c.set);
    const auto v = f.at(c.tag);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += v[i] * w;
  }
  return s;
}

namespace detail {

inline std::vector<double> interior(const std::vector<double>& br) {
  return br.size() > 2 ? std::vector<double>(br.begin() + 1, br.end() - 1) : std::vector<double>{};
}

// Radius rule: eta below distance eta, otherwise the largest eta*2^j <= d.
inline double shell_radius(double d, double eta) {
  double r = eta;
  while (2.0 * r <= d) r *= 2.0;
  return r;
}

}  // namespace detail

/// Gauge certifying |S - w| < eps for every partition subordinate to it.
/// Tags farther than their radius from every breakpoint of f or m see no
/// jump; the rest have radius eta and their cells lie within 2 eta of one of
/// the K breakpoints, so |S - w| <= 8 K eta |f| rho_max < eps for
/// eta = eps / (9 K |f| rho_max).
inline Gauge certified_gauge(const StepFn& f, const DensityMeasure& m, double eps) {
  detail::require(eps > 0.0, "certified_gauge: eps must be > 0");
  auto pts = detail::merge_breaks({&f.breaks(), &m.breaks()});
  pts = detail::interior(pts);
  const double fn = f.sup_norm(), rho = m.max_density();
  if (pts.empty() || fn == 0.0 || rho == 0.0) return Gauge::constant(1.0);
  const double eta = eps / (9.0 * static_cast<double>(pts.size()) * fn * rho);
  std::vector<double> br{0.0, 1.0};
  for (double b : pts) {
    br.push_back(b);
    for (double s = eta; s < 1.0; s *= 2.0) {
      if (b - s > 0.0) br.push_back(b - s);
      if (b + s < 1.0) br.push_back(b + s);
    }
  }
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  auto dist = [&](double t) {
    double d = std::numeric_limits<double>::infinity();
    for (double b : pts) d = std::min(d, std::abs(t - b));
    return d;
  };
  std::vector<double> radii;
  for (std::size_t k = 0; k + 1 < br.size(); ++k)
    radii.push_back(detail::shell_radius(std::min(dist(br[k]), dist(br[k + 1])), eta));
  return Gauge(std::move(br), std::move(radii));
}

struct MsIntegral {
  StepFn f;
  DensityMeasure m;
  std::vector<double> w;

  Gauge gauge_for(double eps) const { return certified_gauge(f, m, eps); }
};

/// McShane integral of a step function: exact value plus the eps -> gauge map.
inline MsIntegral ms_integral(const StepFn& f, const DensityMeasure& m) {
  return {f, m, integral_over(f, m, {{0.0, 1.0}})};
}

inline double distance(const std::vector<double>& a, const std::vector<double>& b, VectorNorm norm) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
  return vector_norm(d, norm);
}

// ---------------------------------------------------------------------------
// Sequences on [0,1].

struct StepFamily {
  std::string name;
  std::function<StepFn(std::size_t)> at;
  StepFn limit;
  std::optional<DecayCertificate> sup_cert;  // bounds sup_t |f_n(t) - f(t)|
  bool constant = false;
  std::optional<std::size_t> length;

  std::size_t last_index(std::size_t horizon) const { return length ? std::min(horizon, *length) : horizon; }
};

struct DensityFamily {
  std::string name;
  std::function<DensityMeasure(std::size_t)> at;
  DensityMeasure limit;
  std::optional<DecayCertificate> tv_cert;  // bounds |m_n - m|([0,1])
  bool constant = false;

  std::size_t last_index(std::size_t horizon) const { return horizon; }
};

inline StepFamily constant_step_family(const StepFn& f, std::string name = "constant") {
  return {std::move(name), [f](std::size_t) { return f; }, f, DecayCertificate::zero(), true, std::nullopt};
}

inline DensityFamily constant_density_family(const DensityMeasure& m, std::string name = "constant") {
  return {std::move(name), [m](std::size_t) { return m; }, m, DecayCertificate::zero(), true};
}

/// f_n = f + rate(n) g.
inline StepFamily perturbed_step_family(const StepFn& f, const StepFn& g, const DecayCertificate& rate) {
  StepFamily s;
  s.name = "mcshane_step";
  s.at = [f, g, rate](std::size_t n) { return step_axpy(f, rate(n), g); };
  s.limit = f;
  s.sup_cert = rate.scaled(g.sup_norm(), "rate(n) * |g|_inf");
  return s;
}

/// m_n = (1 - a_n) m + a_n mu, a_n = min(1, rate(n)).
inline DensityFamily density_mix(const DensityMeasure& m, const DensityMeasure& mu, const DecayCertificate& rate) {
  DensityFamily d;
  d.name = "density_mix";
  d.at = [m, mu, rate](std::size_t n) { return density_combine(m, mu, std::min(1.0, rate(n))); };
  d.limit = m;
  d.tv_cert = rate.scaled(density_tv_distance(m, mu), "rate(n) * |mu - m|");
  return d;
}

/// f_n = a on [0, p - 1/(n+2)), b after; limit a on [0, p), b after.
inline StepFamily drifting_step_family(double p, double a, double b) {
  detail::require(p > 1.0 / 3.0 && p < 1.0, "drifting_step_family: breakpoint must be in (1/3, 1)");
  StepFamily s;
  s.name = "mcshane_drift";
  s.at = [p, a, b](std::size_t n) { return StepFn::scalar({0.0, p - 1.0 / static_cast<double>(n + 2), 1.0}, {a, b}); };
  s.limit = StepFn::scalar({0.0, p, 1.0}, {a, b});
  return s;
}

/// f_n = 0 on [0, p), n on [p, 1]: the jump height grows with n.
inline StepFamily jump_family(double p) {
  detail::require(p > 0.0 && p < 1.0, "jump_family: jump point must be in (0,1)");
  StepFamily s;
  s.name = "mcshane_jump";
  s.at = [p](std::size_t n) { return StepFn::scalar({0.0, p, 1.0}, {0.0, static_cast<double>(n)}); };
  s.limit = StepFn::scalar({0.0, p, 1.0}, {0.0, 0.0});
  return s;
}

// ---------------------------------------------------------------------------
// (m_n)-equi-integrability.

struct EquiIntegrability {
  Verdict verdict = Verdict::inconclusive;
  double epsilon = 0.0;
  std::optional<Gauge> gauge;  // common gauge for n <= horizon when verdict holds
  std::optional<TaggedPartition> witness;
  nlohmann::json evidence;
};

/// One gauge for every n <= horizon, from the pointwise minimum of the
/// per-n certified gauges. Accepted when the minimum radius is stable
/// between N/2 and N; otherwise a partition subordinate to the early common
/// gauge (n <= N/64) that straddles a jump of some later f_n refutes it.
inline EquiIntegrability check_equi_integrable(const StepFamily& fs, const DensityFamily& ms, double eps,
                                               std::size_t horizon = kDefaultHorizon) {
  EquiIntegrability out;
  out.epsilon = eps;
  const std::size_t last = std::min(fs.last_index(horizon), ms.last_index(horizon));
  if (last == 0) return out;
  std::vector<Gauge> gauges;
  std::vector<double> prefix_min;
  for (std::size_t n = 1; n <= last; ++n) {
    gauges.push_back(certified_gauge(fs.at(n), ms.at(n), eps));
    const double r = gauges.back().min_radius();
    prefix_min.push_back(prefix_min.empty() ? r : std::min(prefix_min.back(), r));
  }
  const std::size_t half = std::max<std::size_t>(1, last / 2);
  const double r_all = prefix_min.back(), r_half = prefix_min[half - 1];
  out.evidence = {{"epsilon", eps}, {"min_radius", r_all}, {"half_min_radius", r_half}, {"indices", last}};
  if (r_all >= 0.75 * r_half) {
    out.verdict = Verdict::holds;
    out.gauge = Gauge::pointwise_min(gauges);
    out.evidence["gauge_cells"] = out.gauge->radii().size();
    return out;
  }
  const std::size_t n0 = std::max<std::size_t>(1, last / 64);
  const Gauge early = Gauge::pointwise_min(std::vector<Gauge>(gauges.begin(), gauges.begin() + n0));
  for (std::size_t n = n0 + 1; n <= last; ++n) {
    const auto fn = fs.at(n);
    const auto mn = ms.at(n);
    const auto w = integral_over(fn, mn, {{0.0, 1.0}});
    for (double b : fn.jumps()) {
      const double rp = 0.99 * std::min(early.radius_at(b), b);
      TaggedPartition p;
      p.cells = subordinate_cover(early, 0.0, b - rp, 4);
      p.cells.push_back({{{b - rp, b}}, b});
      auto rest = subordinate_cover(early, b, 1.0, 4);
      p.cells.insert(p.cells.end(), rest.begin(), rest.end());
      const double err = distance(riemann_sum(fn, mn, p), w, fn.norm_kind());
      if (err >= eps && is_subordinate(p, early)) {
        out.verdict = Verdict::fails;
        out.witness = std::move(p);
        out.evidence["witness"] = {{"n", n}, {"jump", b}, {"gauge_index", n0}, {"error", err}};
        return out;
      }
    }
  }
  out.verdict = Verdict::inconclusive;
  return out;
}

// ---------------------------------------------------------------------------
// McShane limit theorems.

enum class McMode { setwise, tv };

inline const char* to_string(McMode m) { return m == McMode::setwise ? "setwise" : "tv"; }

namespace detail {

// sup over unions J of cells of |sum_{j in J} c_j| in the given norm. Exact
// for d = 1, for the max norm and for the Euclidean norm in d = 2 (angular
// sweep); a lower bound over 1000 directions for Euclidean d >= 3.
inline double sup_over_unions(const std::vector<std::vector<double>>& c, VectorNorm norm, bool* exact = nullptr) {
  if (c.empty()) return 0.0;
  const std::size_t d = c.front().size();
  if (exact) *exact = true;
  if (d == 1 || norm == VectorNorm::max_abs) {
    double best = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double pos = 0.0, neg = 0.0;
      for (const auto& v : c) (v[k] > 0.0 ? pos : neg) += std::abs(v[k]);
      best = std::max(best, std::max(pos, neg));
    }
    return best;
  }
  auto value_for = [&](std::span<const double> u) {
    std::vector<double> acc(d, 0.0);
    for (const auto& v : c)
      if (dot(u, v) > 0.0)
        for (std::size_t k = 0; k < d; ++k) acc[k] += v[k];
    return varmeas::detail::norm(acc);
  };
  double best = 0.0;
  if (d == 2) {
    std::vector<double> angles;
    for (const auto& v : c) {
      if (v[0] == 0.0 && v[1] == 0.0) continue;
      const double a = std::atan2(v[1], v[0]);
      for (double s : {-1.0, 1.0}) angles.push_back(std::remainder(a + s * std::numbers::pi / 2.0, 2.0 * std::numbers::pi));
    }
    if (angles.empty()) return 0.0;
    std::sort(angles.begin(), angles.end());
    for (std::size_t k = 0; k < angles.size(); ++k) {
      const double lo = angles[k];
      const double hi = k + 1 < angles.size() ? angles[k + 1] : angles.front() + 2.0 * std::numbers::pi;
      const double mid = 0.5 * (lo + hi);
      const double u[2] = {std::cos(mid), std::sin(mid)};
      best = std::max(best, value_for(u));
    }
    return best;
  }
  if (d != 3) throw DimensionMismatch("sup_over_unions: Euclidean sup implemented for d <= 3");
  if (exact) *exact = false;
  const auto grid = DirectionGrid::sphere(1000);
  for (std::size_t k = 0; k < grid.size(); ++k) best = std::max(best, value_for(grid.dir(k)));
  return best;
}

}  // namespace detail

struct McShaneOptions {
  McMode mode = McMode::setwise;
  std::vector<IntervalSet> test_sets;             // setwise mode; default {[0,1]}
  std::size_t test_grid = 64;                      // extra algebra breakpoints k / test_grid
  std::vector<double> epsilon_grid = {1e-1, 1e-2, 1e-3};
};

namespace detail {

inline HypothesisResult equi_hypothesis(std::string label, const StepFamily& fs, const DensityFamily& ms,
                                        std::span<const double> eps_grid, std::size_t horizon) {
  HypothesisResult h;
  h.label = std::move(label);
  bool all = true, any_fail = false;
  auto per = nlohmann::json::array();
  for (double eps : eps_grid) {
    const auto e = check_equi_integrable(fs, ms, eps, horizon);
    all = all && e.verdict == Verdict::holds;
    any_fail = any_fail || e.verdict == Verdict::fails;
    auto j = e.evidence;
    j["verdict"] = e.verdict;
    per.push_back(std::move(j));
  }
  h.verdict = all ? Verdict::holds : (any_fail ? Verdict::fails : Verdict::inconclusive);
  h.certificate = {{"per_epsilon", std::move(per)}};
  return h;
}

// Evaluation grid: spacing h = 4 / N plus the limit's breakpoints. Grid points
// closer than h to an interior breakpoint are below the grid resolution and
// are skipped; the breakpoint itself is kept.
inline std::vector<double> evaluation_points(const StepFn& limit, std::size_t last) {
  const auto& br = limit.breaks();
  std::vector<double> pts = br;
  const std::size_t steps = std::max<std::size_t>(1, last / 4);
  const double h = 1.0 / static_cast<double>(steps);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * h;
    const bool near = std::any_of(br.begin() + 1, br.end() - 1, [&](double b) { return std::abs(t - b) < h; });
    if (!near) pts.push_back(t);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

inline HypothesisResult pointwise_hypothesis(std::string label, const StepFamily& fs, std::size_t last, double tol) {
  const auto pts = evaluation_points(fs.limit, last);
  std::vector<double> worst(last, 0.0), norms(last, 0.0);
  for (std::size_t n = 1; n <= last; ++n) {
    const auto fn = fs.at(n);
    norms[n - 1] = fn.sup_norm();
    for (double t : pts) {
      const auto a = fn.at(t), b = fs.limit.at(t);
      std::vector<double> d(a.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
      worst[n - 1] = std::max(worst[n - 1], fn.norm(d));
    }
  }
  auto c = assess_convergence(worst, fs.sup_cert, tol);
  const auto bounded = check_bounded(norms);
  c.evidence["points"] = pts.size();
  c.evidence["sup_norm_bounded"] = bounded.verdict;
  return {std::move(label), c.verdict, std::move(c.evidence)};
}

inline HypothesisResult measure_hypothesis(std::string label, const DensityFamily& ms, std::size_t last, McMode mode,
                                           double tol) {
  std::vector<double> gaps(last);
  for (std::size_t n = 1; n <= last; ++n)
    gaps[n - 1] = mode == McMode::tv ? density_tv_distance(ms.at(n), ms.limit) : density_sup_set_gap(ms.at(n), ms.limit);
  auto c = assess_convergence(gaps, ms.tv_cert, tol);
  c.evidence["algebra"] = "intervals generated by the breakpoints of m_n and m";
  return {std::move(label), c.verdict, std::move(c.evidence)};
}

}  // namespace detail

/// McShane Vitali theorem: lim_n int_A f_n dm_n = int_A f dm, per test set
/// (setwise mode) or uniformly over the interval algebra (tv mode).
inline TheoremReport check_thmcsequi(const StepFamily& fs, const DensityFamily& ms, double tol,
                                     std::size_t horizon = kDefaultHorizon, const McShaneOptions& opt = {}) {
  const std::size_t last = std::min(fs.last_index(horizon), ms.last_index(horizon));
  TheoremReport r;
  r.theorem = "thmcsequi";
  r.family = fs.name + " / " + ms.name;
  r.tolerance = tol;
  r.hypotheses.push_back(
      detail::equi_hypothesis("ThMcSequi.i (m_n)-equi-integrability", fs, ms, opt.epsilon_grid, horizon));
  r.hypotheses.push_back(detail::pointwise_hypothesis("ThMcSequi.ii f_n(t) -> f(t) on the evaluation grid", fs, last, tol));
  r.hypotheses.push_back(detail::measure_hypothesis(
      opt.mode == McMode::tv ? "ThMcSequi.iii m_n -> m in total variation" : "ThMcSequi.iii m_n -> m setwise", ms, last,
      opt.mode, tol));

  const VectorNorm norm = fs.limit.norm_kind();
  bool exact = true;
  if (opt.mode == McMode::setwise) {
    auto sets = opt.test_sets;
    if (sets.empty()) sets.push_back({{0.0, 1.0}});
    std::vector<std::vector<double>> targets;
    for (const auto& a : sets) targets.push_back(integral_over(fs.limit, ms.limit, a));
    for (std::size_t n = 1; n <= last; ++n) {
      const auto fn = fs.at(n);
      const auto mn = ms.at(n);
      double gap = 0.0;
      for (std::size_t s = 0; s < sets.size(); ++s)
        gap = std::max(gap, distance(integral_over(fn, mn, sets[s]), targets[s], norm));
      r.curve.emplace_back(n, gap);
    }
  } else {
    std::vector<double> grid;
    for (std::size_t k = 0; k <= opt.test_grid; ++k) grid.push_back(static_cast<double>(k) / static_cast<double>(opt.test_grid));
    for (std::size_t n = 1; n <= last; ++n) {
      const auto fn = fs.at(n);
      const auto mn = ms.at(n);
      const auto br = detail::merge_breaks(
          {&fn.breaks(), &mn.breaks(), &fs.limit.breaks(), &ms.limit.breaks(), &grid});
      std::vector<std::vector<double>> c;
      for (std::size_t k = 0; k + 1 < br.size(); ++k) {
        const IntervalSet cell{{br[k], br[k + 1]}};
        auto v = integral_over(fn, mn, cell);
        const auto t = integral_over(fs.limit, ms.limit, cell);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= t[i];
        c.push_back(std::move(v));
      }
      bool ex = true;
      r.curve.emplace_back(n, detail::sup_over_unions(c, norm, &ex));
      exact = exact && ex;
    }
    r.notes.push_back(std::string("gap is sup over the interval algebra generated by all breakpoints and the grid k/") +
                      std::to_string(opt.test_grid) + (exact ? "" : " (direction-sampled lower bound)"));
  }
  r.final_gap = r.curve.empty() ? 0.0 : r.curve.back().second;
  if (last > 0 && fs.sup_cert && ms.tv_cert)
    r.tail_bound = (*fs.sup_cert)(last)*ms.at(last).total() + fs.limit.sup_norm() * (*ms.tv_cert)(last);
  r.notes.push_back(std::string("mode ") + to_string(opt.mode));
  r.settle();
  return r;
}

// ---------------------------------------------------------------------------
// Multifunctions on [0,1] and the grid embedding.

/// Step multifunction: one polytope per cell.
struct StepMultiFn {
  std::vector<double> breaks;
  std::vector<Polytope> bodies;

  StepMultiFn() = default;
  StepMultiFn(std::vector<double> br, std::vector<Polytope> b) : breaks(std::move(br)), bodies(std::move(b)) {
    detail::require_grid(breaks, "StepMultiFn");
    detail::require(bodies.size() + 1 == breaks.size(), "StepMultiFn: need one body per cell");
    for (const auto& c : bodies)
      if (c.dim() != bodies.front().dim()) throw DimensionMismatch("StepMultiFn: bodies of different dimensions");
  }
  std::size_t dim() const { return bodies.front().dim(); }
  const Polytope& at(double t) const { return bodies[detail::cell_index(breaks, t)]; }
};

/// i o Gamma: the step function t -> s(., Gamma(t)) on the grid, measured in
/// the grid sup norm.
inline StepFn embed(const StepMultiFn& g, const GridPtr& grid) {
  std::vector<std::vector<double>> vals;
  for (const auto& b : g.bodies) vals.push_back(radstrom_embed(b, grid).values);
  return StepFn(g.breaks, std::move(vals), VectorNorm::max_abs);
}

/// McShane integral of a step multifunction: sum over cells of m(cell) Gamma_cell.
inline SupportVector ms_integral_multi(const StepMultiFn& g, const DensityMeasure& m, const GridPtr& grid) {
  std::vector<double> c;
  for (std::size_t k = 0; k + 1 < g.breaks.size(); ++k) c.push_back(m.mass(g.breaks[k], g.breaks[k + 1]));
  return minkowski_support(c, g.bodies, grid);
}

/// Same integral as a polytope (d <= 2).
inline Polytope ms_integral_body(const StepMultiFn& g, const DensityMeasure& m) {
  std::vector<double> c;
  for (std::size_t k = 0; k + 1 < g.breaks.size(); ++k) c.push_back(m.mass(g.breaks[k], g.breaks[k + 1]));
  return minkowski_body(c, g.bodies);
}

struct StepMultiFamily {
  std::string name;
  std::size_t dim = 1;
  std::function<StepMultiFn(std::size_t)> at;
  StepMultiFn limit;
  std::optional<DecayCertificate> hausdorff_cert;  // bounds sup_t grid distance of Gamma_n(t), Gamma(t)
  std::optional<std::size_t> length;
};

/// Gamma_n = (1 + rate(n)) Gamma.
inline StepMultiFamily scaling_step_multi_family(const StepMultiFn& g, const DecayCertificate& rate) {
  double radius = 0.0;
  for (const auto& b : g.bodies) radius = std::max(radius, b.radius());
  StepMultiFamily s;
  s.name = "mcshane_interval";
  s.dim = g.dim();
  s.at = [g, rate](std::size_t n) {
    std::vector<Polytope> b;
    for (const auto& c : g.bodies) b.push_back(c.scaled(1.0 + rate(n)));
    return StepMultiFn(g.breaks, std::move(b));
  };
  s.limit = g;
  s.hausdorff_cert = rate.scaled(radius, "rate(n) * max radius");
  return s;
}

inline StepFamily embed_family(const StepMultiFamily& gs, const GridPtr& grid) {
  StepFamily s;
  s.name = "i(" + gs.name + ")";
  auto at = gs.at;
  s.at = [at, grid](std::size_t n) { return embed(at(n), grid); };
  s.limit = embed(gs.limit, grid);
  s.sup_cert = gs.hausdorff_cert;
  s.length = gs.length;
  return s;
}

/// Multivalued McShane theorem through the embedding: the vector theorem is
/// run on i o Gamma_n with gaps in the grid sup norm (the Hausdorff lower
/// bound; exact for d = 1).
inline TheoremReport check_thmc_multivalued(const StepMultiFamily& gs, const DensityFamily& ms, double tol,
                                            std::size_t horizon = kDefaultHorizon, const McShaneOptions& opt = {}) {
  const auto grid = DirectionGrid::standard(gs.dim);
  auto inner = check_thmcsequi(embed_family(gs, grid), ms, tol, horizon, opt);
  TheoremReport r;
  r.theorem = "thmc";
  r.family = gs.name + " / " + ms.name;
  r.tolerance = tol;
  const char* labels[] = {"ThMc.i (m_n)-equi-integrability of (Gamma_n)", "ThMc.ii d_H(Gamma_n(t), Gamma(t)) -> 0",
                          opt.mode == McMode::tv ? "ThMc.iii m_n -> m in total variation" : "ThMc.iii m_n -> m setwise"};
  for (std::size_t k = 0; k < inner.hypotheses.size(); ++k) {
    auto h = inner.hypotheses[k];
    h.label = labels[k];
    r.hypotheses.push_back(std::move(h));
  }
  r.curve = inner.curve;
  r.final_gap = inner.final_gap;
  r.tail_bound = inner.tail_bound;
  r.notes.push_back("gaps in the sup norm over grid " + grid->id() + " (mesh angle " +
                    std::to_string(grid->mesh_angle()) + ")");
  r.parts.push_back(std::move(inner));
  r.settle();
  return r;
}

}  // namespace varmeas
