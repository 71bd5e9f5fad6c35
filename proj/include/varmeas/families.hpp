#pragma once

// Certified sequence families. A family is evaluable at any index n >= 1 and
// carries closed-form decay certificates; limit statements become "checked
// exactly for n <= horizon, certified beyond".

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "measure_core.hpp"
#include "report.hpp"

namespace varmeas {

inline constexpr std::size_t kDefaultHorizon = 512;

/// Portable seeded generator: mt19937_64 with hand-rolled uniform variates so
/// streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for trial `index` of a run seeded with `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return Rng(z ^ (z >> 31));
  }

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::size_t index(std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(engine_() % (hi - lo + 1));
  }
  bool coin(double p = 0.5) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

/// Closed-grammar decay bound: a finite sum of c * n^(-p) (p > 0) and
/// c * q^n (0 < q < 1) terms with c >= 0. The empty sum is the zero bound.
class DecayCertificate {
 public:
  enum class Kind { power, geometric };
  struct Term {
    Kind kind = Kind::power;
    double c = 0.0;
    double rate = 1.0;  // p for power terms, q for geometric terms
  };

  DecayCertificate() = default;

  static DecayCertificate zero(std::string description = "identically zero") {
    DecayCertificate d;
    d.description_ = std::move(description);
    return d;
  }
  static DecayCertificate power(double c, double p, std::string description = {}) {
    DecayCertificate d;
    d.add({Kind::power, c, p});
    d.description_ = description.empty() ? "c*n^-p" : std::move(description);
    return d;
  }
  static DecayCertificate geometric(double c, double q, std::string description = {}) {
    DecayCertificate d;
    d.add({Kind::geometric, c, q});
    d.description_ = description.empty() ? "c*q^n" : std::move(description);
    return d;
  }

  double operator()(std::size_t n) const {
    const double x = static_cast<double>(std::max<std::size_t>(n, 1));
    double s = 0.0;
    for (const auto& t : terms_)
      s += t.kind == Kind::power ? t.c * std::pow(x, -t.rate) : t.c * std::pow(t.rate, x);
    return s;
  }

  bool is_zero() const noexcept { return terms_.empty(); }
  const std::vector<Term>& terms() const noexcept { return terms_; }
  const std::string& description() const noexcept { return description_; }

  DecayCertificate scaled(double k, std::string description = {}) const {
    detail::require(k >= 0.0 && std::isfinite(k), "DecayCertificate::scaled: factor must be finite and >= 0");
    DecayCertificate d = *this;
    if (k == 0.0) d.terms_.clear();
    for (auto& t : d.terms_) t.c *= k;
    if (!description.empty()) d.description_ = std::move(description);
    return d;
  }

  friend DecayCertificate operator+(const DecayCertificate& a, const DecayCertificate& b) {
    DecayCertificate d = a;
    for (const auto& t : b.terms_) d.terms_.push_back(t);
    d.description_ = a.description_ + " + " + b.description_;
    return d;
  }

  void add(Term t) {
    detail::require(t.c >= 0.0 && std::isfinite(t.c), "DecayCertificate: coefficient must be finite and >= 0");
    if (t.kind == Kind::power)
      detail::require(t.rate > 0.0 && std::isfinite(t.rate), "DecayCertificate: power exponent must be > 0");
    else
      detail::require(t.rate > 0.0 && t.rate < 1.0, "DecayCertificate: geometric ratio must be in (0,1)");
    if (t.c > 0.0) terms_.push_back(t);
  }

  void set_description(std::string d) { description_ = std::move(d); }

 private:
  std::vector<Term> terms_;
  std::string description_ = "identically zero";
};

inline void to_json(nlohmann::json& j, const DecayCertificate& d) {
  auto terms = nlohmann::json::array();
  for (const auto& t : d.terms()) {
    if (t.kind == DecayCertificate::Kind::power)
      terms.push_back({{"kind", "power"}, {"c", t.c}, {"p", t.rate}});
    else
      terms.push_back({{"kind", "geometric"}, {"c", t.c}, {"q", t.rate}});
  }
  j = nlohmann::json{{"terms", std::move(terms)}, {"description", d.description()}};
}

inline void from_json(const nlohmann::json& j, DecayCertificate& d) {
  d = DecayCertificate::zero(j.value("description", std::string("identically zero")));
  for (const auto& t : j.at("terms")) {
    const auto kind = t.at("kind").get<std::string>();
    if (kind == "power")
      d.add({DecayCertificate::Kind::power, t.at("c").get<double>(), t.at("p").get<double>()});
    else if (kind == "geometric")
      d.add({DecayCertificate::Kind::geometric, t.at("c").get<double>(), t.at("q").get<double>()});
    else
      throw InvalidArgument("DecayCertificate: unknown term kind '" + kind + "'");
  }
}

// ---------------------------------------------------------------------------

/// n -> m_n with a declared limit m.
struct MeasureFamily {
  std::string name;
  AtomSpace space;
  std::function<SignedMeasure(std::size_t)> at;
  SignedMeasure limit;
  std::optional<DecayCertificate> setwise_cert;  // bounds sup_set_gap(m_n, m)
  std::optional<DecayCertificate> tv_cert;       // bounds |m_n - m|(Omega)
  bool nonneg = true;
  bool constant = false;                  // m_n == limit for every n
  std::optional<std::size_t> length;      // finite sequences: indices 1..length

  std::size_t last_index(std::size_t horizon) const {
    return length ? std::min(horizon, *length) : horizon;
  }

  /// Best available bound on sup_set_gap(m_n, m).
  std::optional<double> setwise_bound(std::size_t n) const {
    std::optional<double> b;
    if (setwise_cert) b = (*setwise_cert)(n);
    if (tv_cert) b = b ? std::min(*b, (*tv_cert)(n)) : (*tv_cert)(n);
    return b;
  }
};

/// n -> f_n with a declared limit f.
struct FunctionFamily {
  std::string name;
  AtomSpace space;
  std::function<AtomFunction(std::size_t)> at;
  AtomFunction limit;
  std::optional<DecayCertificate> sup_cert;        // bounds sup_i |f_n(i) - f(i)|
  std::optional<DecayCertificate> inmeasure_cert;  // bounds m{|f_n - f| > delta} for every grid delta
  std::optional<double> uniform_bound;             // declared sup_n sup_i |f_n(i)|
  bool constant = false;
  std::optional<std::size_t> length;

  std::size_t last_index(std::size_t horizon) const {
    return length ? std::min(horizon, *length) : horizon;
  }
};

inline MeasureFamily constant_measure_family(const SignedMeasure& m, std::string name = "constant") {
  MeasureFamily mf;
  mf.name = std::move(name);
  mf.space = m.space();
  mf.at = [m](std::size_t) { return m; };
  mf.limit = m;
  mf.setwise_cert = DecayCertificate::zero();
  mf.tv_cert = DecayCertificate::zero();
  mf.nonneg = m.is_nonnegative();
  mf.constant = true;
  return mf;
}

inline FunctionFamily constant_function_family(const AtomFunction& f, std::string name = "constant") {
  FunctionFamily ff;
  ff.name = std::move(name);
  ff.space = f.space();
  ff.at = [f](std::size_t) { return f; };
  ff.limit = f;
  ff.sup_cert = DecayCertificate::zero();
  ff.inmeasure_cert = DecayCertificate::zero();
  ff.uniform_bound = f.sup_norm();
  ff.constant = true;
  return ff;
}

/// m_n = (1 - a_n) m + a_n mu with a_n = min(1, rate(n)).
inline MeasureFamily convex_mix(const SignedMeasure& m, const SignedMeasure& mu, const DecayCertificate& rate) {
  require_same_space(m.space(), mu.space(), "convex_mix");
  detail::require(m.is_nonnegative() && mu.is_nonnegative(), "convex_mix: measures must be nonnegative");
  MeasureFamily mf;
  mf.name = "convex_mix";
  mf.space = m.space();
  mf.at = [m, mu, rate](std::size_t n) {
    const double a = std::min(1.0, rate(n));
    std::vector<double> w(m.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = (1.0 - a) * m[i] + a * mu[i];
    return SignedMeasure(m.space(), std::move(w));
  };
  mf.limit = m;
  const double tv = total_variation_distance(mu, m);
  mf.tv_cert = rate.scaled(tv, "rate(n) * |mu - m|(Omega)");
  mf.setwise_cert = rate.scaled(sup_set_gap(mu, m), "rate(n) * sup_A |mu(A) - m(A)|");
  mf.nonneg = true;
  mf.constant = tv == 0.0;
  return mf;
}

/// Signed analogue of convex_mix: m_n = m + a_n (mu - m), no sign requirement.
inline MeasureFamily signed_mix(const SignedMeasure& m, const SignedMeasure& mu, const DecayCertificate& rate) {
  require_same_space(m.space(), mu.space(), "signed_mix");
  MeasureFamily mf;
  mf.name = "signed_mix";
  mf.space = m.space();
  mf.at = [m, mu, rate](std::size_t n) {
    const double a = std::min(1.0, rate(n));
    std::vector<double> w(m.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = m[i] + a * (mu[i] - m[i]);
    return SignedMeasure(m.space(), std::move(w));
  };
  mf.limit = m;
  mf.tv_cert = rate.scaled(total_variation_distance(mu, m), "rate(n) * |mu - m|(Omega)");
  mf.setwise_cert = rate.scaled(sup_set_gap(mu, m), "rate(n) * sup_A |mu(A) - m(A)|");
  mf.nonneg = m.is_nonnegative() && mu.is_nonnegative();
  mf.constant = total_variation_distance(mu, m) == 0.0;
  return mf;
}

/// Family of Jordan parts n -> m_n^+ (or m_n^-). Parts inherit the parent's
/// total-variation certificate: |m_n^+ - m^+|(Omega) <= |m_n - m|(Omega).
inline MeasureFamily jordan_part_family(const MeasureFamily& parent, bool positive) {
  MeasureFamily mf;
  mf.name = parent.name + (positive ? "^+" : "^-");
  mf.space = parent.space;
  auto at = parent.at;
  mf.at = [at, positive](std::size_t n) {
    auto jp = jordan(at(n));
    return positive ? jp.pos : jp.neg;
  };
  const auto lim = jordan(parent.limit);
  mf.limit = positive ? lim.pos : lim.neg;
  if (parent.tv_cert) {
    mf.tv_cert = parent.tv_cert;
    mf.setwise_cert = parent.tv_cert;
  }
  mf.nonneg = true;
  mf.constant = parent.constant;
  mf.length = parent.length;
  return mf;
}

/// n -> |m_n|.
inline MeasureFamily variation_family(const MeasureFamily& parent) {
  MeasureFamily mf;
  mf.name = "|" + parent.name + "|";
  mf.space = parent.space;
  auto at = parent.at;
  mf.at = [at](std::size_t n) { return at(n).abs(); };
  mf.limit = parent.limit.abs();
  if (parent.tv_cert) {
    mf.tv_cert = parent.tv_cert;
    mf.setwise_cert = parent.tv_cert;
  }
  mf.nonneg = true;
  mf.constant = parent.constant;
  mf.length = parent.length;
  return mf;
}

/// f_n = f + a_n g with a_n = rate(n); certified in sup norm by |g|_inf * rate.
inline FunctionFamily perturbed_function(const AtomFunction& f, const AtomFunction& g, const DecayCertificate& rate) {
  require_same_space(f.space(), g.space(), "perturbed_function");
  if (f.dim() != g.dim()) throw DimensionMismatch("perturbed_function: dimension mismatch");
  FunctionFamily ff;
  ff.name = "perturbed";
  ff.space = f.space();
  ff.at = [f, g, rate](std::size_t n) {
    const double a = rate(n);
    std::vector<double> v(f.values().begin(), f.values().end());
    const auto gv = g.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += a * gv[i];
    return AtomFunction(f.space(), std::move(v), f.dim());
  };
  ff.limit = f;
  ff.sup_cert = rate.scaled(g.sup_norm(), "rate(n) * |g|_inf");
  ff.uniform_bound = f.sup_norm() + g.sup_norm() * rate(1);
  ff.constant = g.sup_norm() == 0.0;
  return ff;
}

/// Rademacher measures at finite scale: atoms are the 2^level dyadic cells of [0,1]
/// under Lebesgue measure, m_k has density r_k (k-th Rademacher function),
/// k = 1..level, limit the zero measure. |m_k|(Omega) = 1 for every k, while
/// m_k(A) = 0 for A in the dyadic algebra of any level < k.
inline MeasureFamily rademacher_family(unsigned level) {
  if (level < 1 || level > 16) throw InvalidArgument("rademacher_family: level must be in [1, 16]");
  const std::size_t n_atoms = std::size_t{1} << level;
  const AtomSpace space(n_atoms);
  const double cell = 1.0 / static_cast<double>(n_atoms);
  MeasureFamily mf;
  mf.name = "rademacher(level=" + std::to_string(level) + ")";
  mf.space = space;
  mf.at = [space, level, cell](std::size_t k) {
    if (k < 1 || k > level) throw InvalidArgument("rademacher_family: index out of range");
    std::vector<double> w(space.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = ((i >> (level - k)) & 1u) ? -cell : cell;
    return SignedMeasure(space, std::move(w));
  };
  mf.limit = SignedMeasure::zero(space);
  mf.nonneg = false;
  mf.length = level;
  return mf;
}

/// Mass escaping to a vanishing set: f_n = n on atom (n mod N), m_n = (1/n)
/// on that atom, zero elsewhere. Integral of |f_n| dm_n is 1 for every n while
/// the limits are f = 0, m = 0. Violates (u.i.) and (u.a.c.).
inline std::pair<MeasureFamily, FunctionFamily> mass_escape_family(const AtomSpace& space) {
  detail::require(space.size() >= 2, "mass_escape_family: need at least 2 atoms");
  const std::size_t n_atoms = space.size();
  MeasureFamily mf;
  mf.name = "mass_escape";
  mf.space = space;
  mf.at = [space, n_atoms](std::size_t n) {
    std::vector<double> w(n_atoms, 0.0);
    w[n % n_atoms] = 1.0 / static_cast<double>(n);
    return SignedMeasure(space, std::move(w));
  };
  mf.limit = SignedMeasure::zero(space);
  mf.tv_cert = DecayCertificate::power(1.0, 1.0, "1/n");
  mf.setwise_cert = mf.tv_cert;
  mf.nonneg = true;

  FunctionFamily ff;
  ff.name = "mass_escape";
  ff.space = space;
  ff.at = [space, n_atoms](std::size_t n) {
    std::vector<double> v(n_atoms, 0.0);
    v[n % n_atoms] = static_cast<double>(n);
    return AtomFunction(space, std::move(v));
  };
  ff.limit = AtomFunction::constant(space, 0.0);
  // f_n differs from 0 only where the limit measure vanishes.
  ff.inmeasure_cert = DecayCertificate::zero("limit measure is zero");
  return {mf, ff};
}

/// f_n = n on every atom, m_n = m = unit mass on each atom. Every set with
/// m(A) < 1 is empty, so (u.a.c.) holds vacuously, while sup_n of the
/// integral of |f_n| dm_n is infinite.
inline std::pair<MeasureFamily, FunctionFamily> vacuous_uac_family(const AtomSpace& space) {
  const SignedMeasure unit(space, std::vector<double>(space.size(), 1.0));
  MeasureFamily mf = constant_measure_family(unit, "vacuous_uac");
  FunctionFamily ff;
  ff.name = "vacuous_uac";
  ff.space = space;
  ff.at = [space](std::size_t n) { return AtomFunction::constant(space, static_cast<double>(n)); };
  ff.limit = AtomFunction::constant(space, 0.0);
  return {mf, ff};
}

// ---------------------------------------------------------------------------
// Certificate verification.

struct CertificateCheck {
  bool sound = true;
  std::size_t first_violation = 0;  // index n, 0 if sound
  double observed = 0.0;
  double bound = 0.0;
};

/// Check observed[n-1] <= cert(n) (+ slack) for every index.
inline CertificateCheck verify_certificate(const DecayCertificate& cert, std::span<const double> observed,
                                           double abs_slack = 1e-12) {
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double b = cert(k + 1);
    const double slack = abs_slack * std::max(1.0, std::abs(b));
    if (observed[k] > b + slack) return {false, k + 1, observed[k], b};
  }
  return {};
}

/// Soundness of a measure family's certificates for n <= horizon.
inline CertificateCheck verify_measure_family(const MeasureFamily& mf, std::size_t horizon) {
  const std::size_t last = mf.last_index(horizon);
  std::vector<double> sup_gap(last), tv(last);
  for (std::size_t n = 1; n <= last; ++n) {
    const auto mn = mf.at(n);
    sup_gap[n - 1] = sup_set_gap(mn, mf.limit);
    tv[n - 1] = total_variation_distance(mn, mf.limit);
  }
  if (mf.setwise_cert)
    if (auto c = verify_certificate(*mf.setwise_cert, sup_gap); !c.sound) return c;
  if (mf.tv_cert)
    if (auto c = verify_certificate(*mf.tv_cert, tv); !c.sound) return c;
  return {};
}

inline const std::vector<double>& default_deviation_grid() {
  static const std::vector<double> grid{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  return grid;
}

/// Soundness of a function family's certificates for n <= horizon, with the
/// in-measure certificate read against `m`.
inline CertificateCheck verify_function_family(const FunctionFamily& ff, const SignedMeasure& m, std::size_t horizon,
                                               std::span<const double> delta_grid = default_deviation_grid()) {
  const std::size_t last = ff.last_index(horizon);
  std::vector<double> sup_dev(last), meas_dev(last), norms(last);
  for (std::size_t n = 1; n <= last; ++n) {
    const auto fn = ff.at(n);
    sup_dev[n - 1] = (fn - ff.limit).sup_norm();
    norms[n - 1] = fn.sup_norm();
    double worst = 0.0;
    for (double d : delta_grid) worst = std::max(worst, deviation_mass(fn, ff.limit, m, d));
    meas_dev[n - 1] = worst;
  }
  if (ff.sup_cert)
    if (auto c = verify_certificate(*ff.sup_cert, sup_dev); !c.sound) return c;
  if (ff.inmeasure_cert)
    if (auto c = verify_certificate(*ff.inmeasure_cert, meas_dev); !c.sound) return c;
  if (ff.uniform_bound)
    for (std::size_t k = 0; k < last; ++k)
      if (norms[k] > *ff.uniform_bound * (1 + 1e-12) + 1e-12) return {false, k + 1, norms[k], *ff.uniform_bound};
  return {};
}

// ---------------------------------------------------------------------------
// Finite-horizon reading of "x_n -> 0".

struct ConvergenceCheck {
  Verdict verdict = Verdict::inconclusive;
  nlohmann::json evidence;
};

/// values[n-1] is a nonnegative gap at index n. With a certificate, the
/// sequence converges iff every observed value is under the bound (the bound
/// decays by construction). Without one: a tail (second half of the range)
/// that is identically zero is accepted; a tail bounded away from zero by
/// more than `tol` is refuted; anything else is inconclusive.
inline ConvergenceCheck assess_convergence(std::span<const double> values, const std::optional<DecayCertificate>& cert,
                                           double tol, double zero_tol = 1e-12) {
  ConvergenceCheck out;
  const std::size_t last = values.size();
  out.evidence["indices"] = last;
  if (last == 0) {
    out.evidence["note"] = "empty range";
    return out;
  }
  out.evidence["final"] = values.back();
  if (cert) {
    out.evidence["method"] = "certificate";
    out.evidence["certificate"] = *cert;
    const auto c = verify_certificate(*cert, values);
    if (c.sound) {
      out.verdict = Verdict::holds;
    } else {
      out.verdict = Verdict::fails;
      out.evidence["violation"] = {{"n", c.first_violation}, {"observed", c.observed}, {"bound", c.bound}};
    }
    return out;
  }
  const std::size_t head = last / 2;
  double tail_min = std::numeric_limits<double>::infinity(), tail_sup = 0.0;
  std::size_t arg_sup = last;
  for (std::size_t k = head; k < last; ++k) {
    tail_min = std::min(tail_min, values[k]);
    if (values[k] > tail_sup) {
      tail_sup = values[k];
      arg_sup = k + 1;
    }
  }
  out.evidence["method"] = "tail";
  out.evidence["tail_from"] = head + 1;
  out.evidence["tail_min"] = tail_min;
  out.evidence["tail_sup"] = tail_sup;
  if (tail_sup <= zero_tol) {
    out.verdict = Verdict::holds;
  } else if (tail_min > tol) {
    out.verdict = Verdict::fails;
    out.evidence["witness_n"] = arg_sup;
  }
  return out;
}

}  // namespace varmeas
