#pragma once

// Uniform absolute continuity and uniform integrability of (f_n) with respect
// to varying measures (m_n), and the scalar Vitali-type limit engine.
//
// Finite-horizon reading of the quantifier "for all n": the family is
// examined on n <= N and on the first quarter n <= N/4. A modulus (delta for
// u.a.c., alpha for u.i., the bound for sup_n integrals) is accepted when it
// stays within one dyadic step between the two ranges; when it keeps
// shrinking, an exact witness from the later indices refutes the property.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "families.hpp"
#include "measure_core.hpp"
#include "report.hpp"

namespace varmeas {

enum class WorstSetMethod { exact_knapsack, fractional_relaxation, greedy_feasible };

inline const char* to_string(WorstSetMethod m) {
  switch (m) {
    case WorstSetMethod::exact_knapsack: return "exact-knapsack";
    case WorstSetMethod::fractional_relaxation: return "fractional-relaxation";
    case WorstSetMethod::greedy_feasible: return "greedy-feasible";
  }
  return "?";
}

/// Largest atom count for which worst_set_integral is solved exactly.
inline constexpr std::size_t kExactKnapsackMaxAtoms = 20;

struct WorstSet {
  double value = 0.0;
  WorstSetMethod method = WorstSetMethod::exact_knapsack;
  std::optional<MeasurableSet> set;  // attaining set when the method produces one
};

namespace detail {

struct KnapItem {
  std::size_t atom;
  double weight;
  double value;
};

// Items with positive weight and value, sorted by value density descending.
inline std::vector<KnapItem> knap_items(const AtomFunction& f, const SignedMeasure& m) {
  std::vector<KnapItem> items;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double w = m[i];
    const double v = f.norm_at(i) * w;
    if (w > 0.0 && v > 0.0) items.push_back({i, w, v});
  }
  std::stable_sort(items.begin(), items.end(), [](const KnapItem& a, const KnapItem& b) {
    return a.value / a.weight > b.value / b.weight;
  });
  return items;
}

inline double fractional_fill(const std::vector<KnapItem>& items, std::size_t from, double capacity) {
  double value = 0.0;
  for (std::size_t k = from; k < items.size() && capacity > 0.0; ++k) {
    if (items[k].weight <= capacity) {
      value += items[k].value;
      capacity -= items[k].weight;
    } else {
      value += items[k].value * (capacity / items[k].weight);
      capacity = 0.0;
    }
  }
  return value;
}

class KnapsackSearch {
 public:
  KnapsackSearch(const std::vector<KnapItem>& items, double delta) : items_(items), delta_(delta) {
    chosen_.assign(items.size(), false);
  }

  std::pair<double, std::vector<bool>> run() {
    dfs(0, 0.0, 0.0);
    return {best_, best_set_};
  }

 private:
  void dfs(std::size_t k, double weight, double value) {
    if (value > best_) {
      best_ = value;
      best_set_ = chosen_;
    }
    if (k == items_.size()) return;
    if (value + fractional_fill(items_, k, delta_ - weight) <= best_) return;
    if (weight + items_[k].weight < delta_) {
      chosen_[k] = true;
      dfs(k + 1, weight + items_[k].weight, value + items_[k].value);
      chosen_[k] = false;
    }
    dfs(k + 1, weight, value);
  }

  const std::vector<KnapItem>& items_;
  double delta_;
  double best_ = 0.0;
  std::vector<bool> chosen_, best_set_;
};

inline MeasurableSet items_to_set(std::size_t width, const std::vector<KnapItem>& items,
                                  const std::vector<bool>& chosen) {
  auto s = MeasurableSet::empty(width);
  for (std::size_t k = 0; k < chosen.size(); ++k)
    if (chosen[k]) s.insert(items[k].atom);
  return s;
}

}  // namespace detail

/// max { integral over A of |f| dm : m(A) < delta } for a nonnegative m.
/// Exact (branch and bound over subsets) up to kExactKnapsackMaxAtoms atoms,
/// otherwise the fractional-knapsack relaxation, which bounds it from above.
inline WorstSet worst_set_integral(const AtomFunction& f, const SignedMeasure& m, double delta) {
  require_fn_on(f, m, "worst_set_integral");
  detail::require(delta > 0.0, "worst_set_integral: delta must be > 0");
  if (!m.is_nonnegative()) throw InvalidArgument("worst_set_integral: measure must be nonnegative");
  const auto items = detail::knap_items(f, m);
  if (m.size() <= kExactKnapsackMaxAtoms) {
    detail::KnapsackSearch search(items, delta);
    auto [value, chosen] = search.run();
    return {value, WorstSetMethod::exact_knapsack, detail::items_to_set(m.size(), items, chosen)};
  }
  return {detail::fractional_fill(items, 0, delta), WorstSetMethod::fractional_relaxation, std::nullopt};
}

/// A feasible set (m(A) < delta) with a large integral: exact on small spaces,
/// greedy by density otherwise. Its value is always attained.
inline WorstSet feasible_witness(const AtomFunction& f, const SignedMeasure& m, double delta) {
  if (m.size() <= kExactKnapsackMaxAtoms) return worst_set_integral(f, m, delta);
  const auto items = detail::knap_items(f, m);
  std::vector<bool> chosen(items.size(), false);
  double weight = 0.0, value = 0.0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (weight + items[k].weight < delta) {
      chosen[k] = true;
      weight += items[k].weight;
      value += items[k].value;
    }
  }
  return {value, WorstSetMethod::greedy_feasible, detail::items_to_set(m.size(), items, chosen)};
}

// ---------------------------------------------------------------------------
// Uniform absolute continuity.

/// Geometric delta grid 2^-k, k = 0..40.
inline constexpr int kDeltaGridMaxExponent = 40;
inline double delta_grid_value(int k) { return std::ldexp(1.0, -k); }

inline const std::vector<double>& default_epsilon_grid() {
  static const std::vector<double> grid{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  return grid;
}

struct UacCertificate {
  double epsilon = 0.0;
  std::optional<double> delta;          // modulus valid for every checked n
  std::optional<double> quarter_delta;  // modulus over the first quarter of the range
  Verdict verdict = Verdict::inconclusive;
  WorstSetMethod method = WorstSetMethod::exact_knapsack;
  std::size_t indices = 0;
  std::optional<std::size_t> witness_n;
  std::optional<MeasurableSet> witness_set;
  std::optional<std::size_t> witness_direction;
  double witness_value = 0.0;
  double witness_mass = 0.0;
};

inline void to_json(nlohmann::json& j, const UacCertificate& c) {
  j = nlohmann::json{{"epsilon", c.epsilon},
                     {"verdict", c.verdict},
                     {"method", to_string(c.method)},
                     {"indices", c.indices}};
  j["delta"] = c.delta ? nlohmann::json(*c.delta) : nlohmann::json(nullptr);
  j["quarter_delta"] = c.quarter_delta ? nlohmann::json(*c.quarter_delta) : nlohmann::json(nullptr);
  if (c.witness_n) {
    nlohmann::json w{{"n", *c.witness_n}, {"integral", c.witness_value}, {"mass", c.witness_mass}};
    if (c.witness_set) w["set"] = c.witness_set->indices();
    if (c.witness_direction) w["direction"] = *c.witness_direction;
    j["witness"] = std::move(w);
  }
}

/// Generic u.a.c. search. `worst(n, delta, witness)` returns the worst-set
/// value at index n: an upper bound (possibly relaxed) when witness == false,
/// an attained value with its set when witness == true. `measure_at(n, set)`
/// evaluates m_n on a witness set.
template <class WorstFn, class MassFn>
UacCertificate uac_search(std::size_t last, double epsilon, WorstFn&& worst, MassFn&& measure_at) {
  detail::require(epsilon > 0.0, "check_uac: epsilon must be > 0");
  UacCertificate cert;
  cert.epsilon = epsilon;
  cert.indices = last;
  if (last == 0) return cert;
  const std::size_t quarter = std::max<std::size_t>(1, last / 4);

  int k_all = 0, k_quarter = 0;
  bool all_exist = true, quarter_exist = true;
  for (std::size_t n = 1; n <= last; ++n) {
    auto below = [&](int k) {
      auto w = worst(n, delta_grid_value(k), false);
      cert.method = w.method;
      return w.value < epsilon;
    };
    int k_n = -1;
    if (below(0)) {
      k_n = 0;
    } else if (below(kDeltaGridMaxExponent)) {
      int lo = 0, hi = kDeltaGridMaxExponent;  // below(lo) false, below(hi) true
      while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        (below(mid) ? hi : lo) = mid;
      }
      k_n = hi;
    }
    if (k_n < 0) {
      all_exist = false;
      if (n <= quarter) quarter_exist = false;
      continue;
    }
    k_all = std::max(k_all, k_n);
    if (n <= quarter) k_quarter = std::max(k_quarter, k_n);
  }
  if (all_exist) cert.delta = delta_grid_value(k_all);
  if (quarter_exist) cert.quarter_delta = delta_grid_value(k_quarter);

  if (all_exist && quarter_exist && k_all <= k_quarter + 1) {
    cert.verdict = Verdict::holds;
    return cert;
  }

  const double probe = quarter_exist ? delta_grid_value(k_quarter) : delta_grid_value(kDeltaGridMaxExponent);
  const std::size_t from = quarter_exist ? quarter + 1 : 1;
  for (std::size_t n = from; n <= last; ++n) {
    auto w = worst(n, probe, true);
    if (w.value >= epsilon && w.set) {
      cert.verdict = Verdict::fails;
      cert.witness_n = n;
      cert.witness_set = w.set;
      cert.witness_value = w.value;
      cert.witness_mass = measure_at(n, *w.set);
      return cert;
    }
  }
  cert.verdict = Verdict::inconclusive;
  return cert;
}

/// Does (f_n) have uniformly absolutely continuous (m_n)-integrals at level
/// epsilon? Single-function (f_n = f) and single-measure (m_n = m) cases are
/// the constant families.
inline UacCertificate check_uac(const FunctionFamily& ff, const MeasureFamily& mf, double epsilon,
                                std::size_t horizon = kDefaultHorizon) {
  require_same_space(ff.space, mf.space, "check_uac");
  const std::size_t last = std::min(ff.last_index(horizon), mf.last_index(horizon));
  std::vector<AtomFunction> fs;
  std::vector<SignedMeasure> ms;
  fs.reserve(last);
  ms.reserve(last);
  for (std::size_t n = 1; n <= last; ++n) {
    fs.push_back(ff.at(n).abs());
    ms.push_back(mf.at(n));
    if (!ms.back().is_nonnegative()) throw PreconditionFailed("check_uac: measure family must be nonnegative");
  }
  return uac_search(
      last, epsilon,
      [&](std::size_t n, double delta, bool witness) {
        return witness ? feasible_witness(fs[n - 1], ms[n - 1], delta) : worst_set_integral(fs[n - 1], ms[n - 1], delta);
      },
      [&](std::size_t n, const MeasurableSet& a) { return eval(ms[n - 1], a); });
}

/// Aggregate of per-epsilon u.a.c. certificates into one hypothesis verdict.
inline HypothesisResult aggregate_uac(std::string label, const std::vector<UacCertificate>& certs) {
  HypothesisResult h;
  h.label = std::move(label);
  bool all_hold = !certs.empty(), any_fail = false;
  for (const auto& c : certs) {
    all_hold = all_hold && c.verdict == Verdict::holds;
    any_fail = any_fail || c.verdict == Verdict::fails;
  }
  h.verdict = all_hold ? Verdict::holds : (any_fail ? Verdict::fails : Verdict::inconclusive);
  h.certificate = nlohmann::json{{"per_epsilon", certs}};
  return h;
}

inline HypothesisResult uac_hypothesis(std::string label, const FunctionFamily& ff, const MeasureFamily& mf,
                                       std::span<const double> epsilon_grid, std::size_t horizon) {
  std::vector<UacCertificate> certs;
  for (double eps : epsilon_grid) certs.push_back(check_uac(ff, mf, eps, horizon));
  return aggregate_uac(std::move(label), certs);
}

// ---------------------------------------------------------------------------
// Uniform integrability.

/// Truncation levels 2^k, k = -20..62.
inline std::vector<double> default_alpha_grid() {
  std::vector<double> a;
  for (int k = -20; k <= 62; ++k) a.push_back(std::ldexp(1.0, k));
  return a;
}

struct UiCurve {
  std::vector<double> alphas;
  std::vector<double> values;          // alpha -> sup_{n <= N} tail integral
  std::vector<double> quarter_values;  // same over n <= N/4
  std::optional<DecayCertificate> tail_cert;
  std::size_t indices = 0;
  Verdict verdict = Verdict::inconclusive;  // whether the curve decays to 0
  nlohmann::json evidence;
};

inline void to_json(nlohmann::json& j, const UiCurve& c) {
  j = nlohmann::json{{"alphas", c.alphas}, {"values", c.values}, {"indices", c.indices},
                     {"verdict", c.verdict}, {"evidence", c.evidence}};
  if (c.tail_cert) j["tail_cert"] = *c.tail_cert;
}

/// integral over {|f| > alpha} of |f| dm.
inline double tail_integral(const AtomFunction& f, const SignedMeasure& m, double alpha) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double v = f.norm_at(i);
    if (v > alpha) s += v * std::abs(m[i]);
  }
  return s;
}

namespace detail {

// Smallest grid index whose value is below eps (values nonincreasing).
inline std::optional<std::size_t> first_below(const std::vector<double>& values, double eps) {
  for (std::size_t k = 0; k < values.size(); ++k)
    if (values[k] < eps) return k;
  return std::nullopt;
}

}  // namespace detail

/// Evaluate alpha -> sup_n integral over {|f_n| > alpha} of |f_n| dm_n and
/// decide whether it decays (at every epsilon of `epsilon_grid`).
inline UiCurve check_ui(const FunctionFamily& ff, const MeasureFamily& mf, std::size_t horizon = kDefaultHorizon,
                        std::span<const double> epsilon_grid = default_epsilon_grid()) {
  require_same_space(ff.space, mf.space, "check_ui");
  UiCurve c;
  c.alphas = default_alpha_grid();
  const std::size_t last = std::min(ff.last_index(horizon), mf.last_index(horizon));
  const std::size_t quarter = std::max<std::size_t>(1, last / 4);
  c.indices = last;
  c.values.assign(c.alphas.size(), 0.0);
  c.quarter_values.assign(c.alphas.size(), 0.0);
  std::vector<std::vector<double>> per_n;  // kept for witnesses
  double mass_sup = 0.0;
  for (std::size_t n = 1; n <= last; ++n) {
    const auto fn = ff.at(n);
    const auto mn = mf.at(n);
    if (!mn.is_nonnegative()) throw PreconditionFailed("check_ui: measure family must be nonnegative");
    mass_sup = std::max(mass_sup, mn.mass());
    std::vector<double> row(c.alphas.size());
    for (std::size_t k = 0; k < c.alphas.size(); ++k) {
      row[k] = tail_integral(fn, mn, c.alphas[k]);
      c.values[k] = std::max(c.values[k], row[k]);
      if (n <= quarter) c.quarter_values[k] = std::max(c.quarter_values[k], row[k]);
    }
    per_n.push_back(std::move(row));
  }
  if (ff.uniform_bound) {
    const double b = *ff.uniform_bound;
    c.tail_cert = DecayCertificate::power(b * b * mass_sup, 1.0, "B^2 sup_n m_n(Omega) / alpha");
  }
  if (last == 0) return c;

  bool all = true, any_fail = false;
  auto per_eps = nlohmann::json::array();
  for (double eps : epsilon_grid) {
    const auto k_all = detail::first_below(c.values, eps);
    const auto k_q = detail::first_below(c.quarter_values, eps);
    nlohmann::json e{{"epsilon", eps}};
    e["alpha"] = k_all ? nlohmann::json(c.alphas[*k_all]) : nlohmann::json(nullptr);
    e["quarter_alpha"] = k_q ? nlohmann::json(c.alphas[*k_q]) : nlohmann::json(nullptr);
    Verdict v = Verdict::inconclusive;
    if (k_all && k_q && *k_all <= *k_q + 1) {
      v = Verdict::holds;
    } else {
      // The curve over all n is still >= eps at the quarter modulus: a later
      // index attains it.
      const std::size_t probe = k_q ? *k_q : c.alphas.size() - 1;
      for (std::size_t n = quarter + 1; n <= last; ++n) {
        if (per_n[n - 1][probe] >= eps) {
          v = Verdict::fails;
          e["witness"] = {{"n", n}, {"alpha", c.alphas[probe]}, {"tail", per_n[n - 1][probe]}};
          break;
        }
      }
    }
    e["verdict"] = v;
    per_eps.push_back(std::move(e));
    all = all && v == Verdict::holds;
    any_fail = any_fail || v == Verdict::fails;
  }
  c.verdict = all ? Verdict::holds : (any_fail ? Verdict::fails : Verdict::inconclusive);
  c.evidence = nlohmann::json{{"per_epsilon", std::move(per_eps)}};
  return c;
}

// ---------------------------------------------------------------------------
// sup_n of integrals: bounded iff the running sup over all n is at most twice
// the running sup over the first quarter.

struct SupCheck {
  Verdict verdict = Verdict::inconclusive;
  double sup_all = 0.0;
  double sup_quarter = 0.0;
  std::vector<double> values;
};

inline SupCheck check_bounded(std::vector<double> values, double abs_slack = 1e-12) {
  SupCheck s;
  s.values = std::move(values);
  if (s.values.empty()) return s;
  const std::size_t quarter = std::max<std::size_t>(1, s.values.size() / 4);
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    s.sup_all = std::max(s.sup_all, s.values[k]);
    if (k < quarter) s.sup_quarter = std::max(s.sup_quarter, s.values[k]);
  }
  s.verdict = s.sup_all <= 2.0 * s.sup_quarter + abs_slack ? Verdict::holds : Verdict::fails;
  return s;
}

/// sup_n integral of |f_n| dm_n, read as bounded / unbounded over the horizon.
inline SupCheck check_integral_bound(const FunctionFamily& ff, const MeasureFamily& mf, std::size_t horizon) {
  const std::size_t last = std::min(ff.last_index(horizon), mf.last_index(horizon));
  std::vector<double> v;
  for (std::size_t n = 1; n <= last; ++n) v.push_back(integrate(ff.at(n).abs(), mf.at(n).abs()));
  return check_bounded(std::move(v));
}

/// For a bounded measure sequence, uniform integrability is
/// equivalent to u.a.c. together with sup_n integral of |f_n| dm_n < inf.
inline TheoremReport check_p4_equivalence(const FunctionFamily& ff, const MeasureFamily& mf,
                                          std::span<const double> epsilon_grid = default_epsilon_grid(),
                                          std::size_t horizon = kDefaultHorizon) {
  require_same_space(ff.space, mf.space, "check_p4_equivalence");
  const std::size_t last = std::min(ff.last_index(horizon), mf.last_index(horizon));
  std::vector<double> masses;
  for (std::size_t n = 1; n <= last; ++n) masses.push_back(mf.at(n).total_variation());
  const auto bounded = check_bounded(masses);
  if (bounded.verdict != Verdict::holds)
    throw PreconditionFailed("check_p4_equivalence: measure family is not bounded (sup_n m_n(Omega) grows)");

  TheoremReport r;
  r.theorem = "p4";
  r.family = ff.name + " / " + mf.name;
  const auto ui = check_ui(ff, mf, horizon, epsilon_grid);
  r.hypotheses.push_back({"u.i.", ui.verdict, ui.evidence});
  r.hypotheses.push_back(uac_hypothesis("u.a.c.", ff, mf, epsilon_grid, horizon));
  const auto bound = check_integral_bound(ff, mf, horizon);
  r.hypotheses.push_back({"bounded integrals: sup_n int |f_n| dm_n < inf", bound.verdict,
                          nlohmann::json{{"sup_all", bound.sup_all}, {"sup_quarter", bound.sup_quarter}}});
  for (std::size_t n = 1; n <= bound.values.size(); ++n) r.curve.emplace_back(n, bound.values[n - 1]);
  r.final_gap = bound.values.empty() ? 0.0 : bound.values.back();
  r.notes.push_back("sup_n m_n(Omega) = " + std::to_string(bounded.sup_all));

  const auto& h_ui = r.hypotheses[0];
  const auto& h_uac = r.hypotheses[1];
  const auto& h_bound = r.hypotheses[2];
  if (h_ui.verdict == Verdict::inconclusive || h_uac.verdict == Verdict::inconclusive ||
      h_bound.verdict == Verdict::inconclusive) {
    r.verdict = Verdict::inconclusive;
  } else {
    const bool lhs = h_ui.verdict == Verdict::holds;
    const bool rhs = h_uac.verdict == Verdict::holds && h_bound.verdict == Verdict::holds;
    r.verdict = lhs == rhs ? Verdict::pass : Verdict::fail;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Convergence hypotheses.

/// f_n -> f in m-measure: for every delta of the grid, m{|f_n - f| > delta}
/// is compared with the family's certificates.
inline HypothesisResult in_measure_hypothesis(std::string label, const FunctionFamily& ff, const SignedMeasure& m,
                                              std::size_t last, double tol,
                                              std::span<const double> delta_grid = default_deviation_grid()) {
  HypothesisResult h;
  h.label = std::move(label);
  const double total = m.total_variation();
  std::vector<double> worst(last, 0.0);
  bool certified = ff.sup_cert.has_value() || ff.inmeasure_cert.has_value();
  std::optional<std::pair<std::size_t, double>> violation;
  for (std::size_t n = 1; n <= last; ++n) {
    const auto fn = ff.at(n);
    for (double d : delta_grid) {
      const double dev = deviation_mass(fn, ff.limit, m, d);
      worst[n - 1] = std::max(worst[n - 1], dev);
      if (!certified || violation) continue;
      double bound = std::numeric_limits<double>::infinity();
      if (ff.sup_cert) bound = std::min(bound, (*ff.sup_cert)(n) * (1.0 + 1e-9) < d ? 0.0 : total);
      if (ff.inmeasure_cert) bound = std::min(bound, (*ff.inmeasure_cert)(n));
      if (dev > bound + 1e-12 * std::max(1.0, bound)) violation = {n, d};
    }
  }
  if (certified) {
    h.certificate["method"] = "certificate";
    if (ff.sup_cert) h.certificate["sup_cert"] = *ff.sup_cert;
    if (ff.inmeasure_cert) h.certificate["inmeasure_cert"] = *ff.inmeasure_cert;
    if (violation) {
      h.verdict = Verdict::fails;
      h.certificate["violation"] = {{"n", violation->first}, {"delta", violation->second}};
    } else {
      h.verdict = Verdict::holds;
    }
    return h;
  }
  auto c = assess_convergence(worst, std::nullopt, tol);
  h.verdict = c.verdict;
  h.certificate = std::move(c.evidence);
  return h;
}

/// m_n -> m setwise, certified through sup_A |m_n(A) - m(A)|.
inline HypothesisResult setwise_hypothesis(std::string label, const MeasureFamily& mf, std::size_t last, double tol) {
  std::vector<double> gaps(last);
  for (std::size_t n = 1; n <= last; ++n) gaps[n - 1] = sup_set_gap(mf.at(n), mf.limit);
  std::optional<DecayCertificate> cert = mf.setwise_cert ? mf.setwise_cert : mf.tv_cert;
  auto c = assess_convergence(gaps, cert, tol);
  return {std::move(label), c.verdict, std::move(c.evidence)};
}

/// |m_n - m|(Omega) -> 0.
inline HypothesisResult tv_hypothesis(std::string label, const MeasureFamily& mf, std::size_t last, double tol) {
  std::vector<double> gaps(last);
  for (std::size_t n = 1; n <= last; ++n) gaps[n - 1] = total_variation_distance(mf.at(n), mf.limit);
  auto c = assess_convergence(gaps, mf.tv_cert, tol);
  return {std::move(label), c.verdict, std::move(c.evidence)};
}

// ---------------------------------------------------------------------------
// Vitali-type limit theorem for varying measures.

struct VitaliOptions {
  std::vector<double> epsilon_grid = default_epsilon_grid();
};

namespace detail {

inline void require_nonneg_family(const MeasureFamily& mf, std::size_t last, const char* where) {
  if (!mf.limit.is_nonnegative()) throw PreconditionFailed(std::string(where) + ": limit measure must be nonnegative");
  for (std::size_t n = 1; n <= last; ++n)
    if (!mf.at(n).is_nonnegative())
      throw PreconditionFailed(std::string(where) + ": measure family must be nonnegative (n = " +
                               std::to_string(n) + ")");
}

// sup over all sets A of |int_A f_n dm_n - int_A f dm|.
inline double all_sets_gap(const AtomFunction& fn, const SignedMeasure& mn, const AtomFunction& f,
                           const SignedMeasure& m) {
  double pos = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double c = fn[i] * mn[i] - f[i] * m[i];
    (c > 0.0 ? pos : neg) += std::abs(c);
  }
  return std::max(pos, neg);
}

}  // namespace detail

/// Hypotheses (i)-(iv) of the scalar Vitali theorem for varying measures.
inline std::vector<HypothesisResult> th1_hypotheses(const FunctionFamily& ff, const MeasureFamily& mf,
                                                    std::size_t horizon, double tol, const VitaliOptions& opt = {}) {
  const std::size_t last = std::min(ff.last_index(horizon), mf.last_index(horizon));
  std::vector<HypothesisResult> hs;
  hs.push_back(uac_hypothesis("Th1.i u.a.c. of (f_n) w.r.t. (m_n)", ff, mf, opt.epsilon_grid, horizon));
  hs.push_back(in_measure_hypothesis("Th1.ii f_n -> f in m-measure", ff, mf.limit, last, tol));
  hs.push_back(uac_hypothesis("Th1.iii u.a.c. of f w.r.t. (m_n)", constant_function_family(ff.limit), mf,
                              opt.epsilon_grid, horizon));
  hs.push_back(setwise_hypothesis("Th1.iv m_n -> m setwise", mf, last, tol));
  return hs;
}

/// Certified bound on |int_A f_n dm_n - int_A f dm| at index n.
inline std::optional<double> th1_tail_bound(const FunctionFamily& ff, const MeasureFamily& mf, const MeasurableSet& a,
                                            std::size_t n) {
  if (!ff.sup_cert) return std::nullopt;
  std::optional<double> meas;
  if (mf.tv_cert) meas = (*mf.tv_cert)(n);
  if (mf.setwise_cert) meas = meas ? std::min(*meas, 2.0 * (*mf.setwise_cert)(n)) : 2.0 * (*mf.setwise_cert)(n);
  if (!meas) return std::nullopt;
  const double mass_a = eval(mf.at(n).abs(), a);
  return (*ff.sup_cert)(n)*mass_a + ff.limit.sup_norm(a) * *meas;
}

/// lim_n int_A f_n dm_n = int_A f dm, checked over n <= horizon.
inline TheoremReport vitali_limit(const FunctionFamily& ff, const MeasureFamily& mf, const MeasurableSet& a, double tol,
                                  std::size_t horizon = kDefaultHorizon, const VitaliOptions& opt = {}) {
  require_same_space(ff.space, mf.space, "vitali_limit");
  if (!ff.limit.is_scalar()) throw DimensionMismatch("vitali_limit: scalar families only");
  const std::size_t last = std::min(ff.last_index(horizon), mf.last_index(horizon));
  detail::require_nonneg_family(mf, last, "vitali_limit");

  TheoremReport r;
  r.theorem = "th1";
  r.family = ff.name + " / " + mf.name;
  r.tolerance = tol;
  r.hypotheses = th1_hypotheses(ff, mf, horizon, tol, opt);
  const double target = integrate(ff.limit, mf.limit, a);
  for (std::size_t n = 1; n <= last; ++n) r.curve.emplace_back(n, std::abs(integrate(ff.at(n), mf.at(n), a) - target));
  r.final_gap = r.curve.empty() ? 0.0 : r.curve.back().second;
  if (last > 0) r.tail_bound = th1_tail_bound(ff, mf, a, last);
  if (ff.constant) r.specializations.push_back("p1");
  r.settle();
  return r;
}

/// Same hypotheses; conclusion gap is the sup over every set A at each n.
inline TheoremReport vitali_limit_all_sets(const FunctionFamily& ff, const MeasureFamily& mf, double tol,
                                           std::size_t horizon = kDefaultHorizon, const VitaliOptions& opt = {}) {
  require_same_space(ff.space, mf.space, "vitali_limit_all_sets");
  const std::size_t last = std::min(ff.last_index(horizon), mf.last_index(horizon));
  detail::require_nonneg_family(mf, last, "vitali_limit_all_sets");
  TheoremReport r;
  r.theorem = "th1";
  r.family = ff.name + " / " + mf.name;
  r.tolerance = tol;
  r.hypotheses = th1_hypotheses(ff, mf, horizon, tol, opt);
  for (std::size_t n = 1; n <= last; ++n)
    r.curve.emplace_back(n, detail::all_sets_gap(ff.at(n), mf.at(n), ff.limit, mf.limit));
  r.final_gap = r.curve.empty() ? 0.0 : r.curve.back().second;
  if (last > 0) r.tail_bound = th1_tail_bound(ff, mf, MeasurableSet::full(mf.space.size()), last);
  if (ff.constant) r.specializations.push_back("p1");
  r.notes.push_back("gap is sup over all sets A");
  r.settle();
  return r;
}

/// Signed version: the theorem applied to the Jordan parts (m_n^+, m^+) and
/// (m_n^-, m^-) and recombined.
inline TheoremReport signed_vitali(const FunctionFamily& ff, const MeasureFamily& mf, const MeasurableSet& a, double tol,
                                   std::size_t horizon = kDefaultHorizon, const VitaliOptions& opt = {}) {
  require_same_space(ff.space, mf.space, "signed_vitali");
  const std::size_t last = std::min(ff.last_index(horizon), mf.last_index(horizon));
  const auto pos = jordan_part_family(mf, true);
  const auto neg = jordan_part_family(mf, false);
  const auto var = variation_family(mf);

  TheoremReport r;
  r.theorem = "th1s";
  r.family = ff.name + " / " + mf.name;
  r.tolerance = tol;
  r.hypotheses.push_back(uac_hypothesis("Th1s.i u.a.c. of (f_n) w.r.t. (|m_n|)", ff, var, opt.epsilon_grid, horizon));
  r.hypotheses.push_back(in_measure_hypothesis("Th1s.ii f_n -> f in |m|-measure", ff, mf.limit, last, tol));
  const auto f_fam = constant_function_family(ff.limit);
  const auto ui_pos = check_ui(f_fam, pos, horizon, opt.epsilon_grid);
  const auto ui_neg = check_ui(f_fam, neg, horizon, opt.epsilon_grid);
  Verdict ui = Verdict::inconclusive;
  if (ui_pos.verdict == Verdict::holds && ui_neg.verdict == Verdict::holds)
    ui = Verdict::holds;
  else if (ui_pos.verdict == Verdict::fails || ui_neg.verdict == Verdict::fails)
    ui = Verdict::fails;
  r.hypotheses.push_back({"Th1s.iii f u.i. w.r.t. (m_n^+) and (m_n^-)", ui,
                          nlohmann::json{{"plus", ui_pos.evidence}, {"minus", ui_neg.evidence}}});
  auto sw_pos = setwise_hypothesis("m_n^+ -> m^+", pos, last, tol);
  auto sw_neg = setwise_hypothesis("m_n^- -> m^-", neg, last, tol);
  Verdict sw = Verdict::inconclusive;
  if (sw_pos.verdict == Verdict::holds && sw_neg.verdict == Verdict::holds)
    sw = Verdict::holds;
  else if (sw_pos.verdict == Verdict::fails || sw_neg.verdict == Verdict::fails)
    sw = Verdict::fails;
  r.hypotheses.push_back({"Th1s.iv m_n^+- -> m^+- setwise", sw,
                          nlohmann::json{{"plus", sw_pos.certificate}, {"minus", sw_neg.certificate}}});

  const double target = integrate(ff.limit, mf.limit, a);
  for (std::size_t n = 1; n <= last; ++n) r.curve.emplace_back(n, std::abs(integrate(ff.at(n), mf.at(n), a) - target));
  r.final_gap = r.curve.empty() ? 0.0 : r.curve.back().second;

  const bool hyps = r.all_hypotheses_hold();
  if (hyps) {
    r.parts.push_back(vitali_limit(ff, pos, a, tol, horizon, opt));
    r.parts.push_back(vitali_limit(ff, neg, a, tol, horizon, opt));
    if (r.parts[0].tail_bound && r.parts[1].tail_bound) r.tail_bound = *r.parts[0].tail_bound + *r.parts[1].tail_bound;
  }
  r.settle();
  if (r.verdict == Verdict::pass)
    for (const auto& p : r.parts)
      if (p.verdict != Verdict::pass) r.verdict = Verdict::fail;
  return r;
}

/// Partial positive answer to the question whether f inherits u.a.c.: when
/// m_n <= m for every n and (i), (ii), (iv) hold, f has u.a.c. (m_n)-integrals.
inline TheoremReport domination_transfer(const FunctionFamily& ff, const MeasureFamily& mf,
                                         std::span<const double> epsilon_grid = default_epsilon_grid(),
                                         std::size_t horizon = kDefaultHorizon, double tol = 1e-9) {
  require_same_space(ff.space, mf.space, "domination_transfer");
  const std::size_t last = std::min(ff.last_index(horizon), mf.last_index(horizon));
  TheoremReport r;
  r.theorem = "quest";
  r.family = ff.name + " / " + mf.name;
  r.tolerance = tol;
  for (std::size_t n = 1; n <= last; ++n) {
    const auto mn = mf.at(n);
    for (std::size_t i = 0; i < mn.size(); ++i) {
      if (mn[i] > mf.limit[i] + 1e-12 * std::max(1.0, std::abs(mf.limit[i]))) {
        r.verdict = Verdict::not_applicable;
        r.notes.push_back("domination m_n <= m violated at n = " + std::to_string(n) + ", atom " + std::to_string(i));
        return r;
      }
    }
  }
  detail::require_nonneg_family(mf, last, "domination_transfer");
  VitaliOptions opt;
  opt.epsilon_grid.assign(epsilon_grid.begin(), epsilon_grid.end());
  auto hs = th1_hypotheses(ff, mf, horizon, tol, opt);
  r.hypotheses = {hs[0], hs[1], hs[3]};
  if (!r.all_hypotheses_hold()) {
    r.verdict = Verdict::hypothesis_failed;
    return r;
  }
  auto inherited = uac_hypothesis("conclusion: u.a.c. of f w.r.t. (m_n)", constant_function_family(ff.limit), mf,
                                  epsilon_grid, horizon);
  r.verdict = inherited.verdict == Verdict::holds ? Verdict::pass : Verdict::fail;
  r.notes.push_back(std::string("inherited u.a.c.: ") + to_string(inherited.verdict));
  r.hypotheses.push_back(std::move(inherited));
  return r;
}

}  // namespace varmeas
