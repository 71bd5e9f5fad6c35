#pragma once

// Campaign runner: family specs, theorem dispatch, suites, the gallery of
// counterexamples and CSV plot data.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "families.hpp"
#include "integrability.hpp"
#include "json_io.hpp"
#include "mcshane.hpp"
#include "report.hpp"
#include "setvalued_integral.hpp"

namespace varmeas::harness {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitBadSpec = 2;
inline constexpr int kExitInvariant = 3;

inline const std::vector<std::string>& theorem_ids() {
  static const std::vector<std::string> ids{"p4",     "th1",  "th1s", "quest",     "thmulti",
                                            "thmulti2", "th2v", "th1m", "thmcsequi", "thmc"};
  return ids;
}

/// Everything a family spec can provide; theorems pick what they need.
struct FamilyBundle {
  std::string name;
  std::string kind;
  std::optional<MeasureFamily> mf;
  std::optional<FunctionFamily> ff;
  std::optional<MultiFamily> gf;
  std::optional<DensityFamily> df;
  std::optional<StepFamily> sf;
  std::optional<StepMultiFamily> smf;
  std::optional<MeasurableSet> test_set;
  McMode mode = McMode::setwise;
  std::map<std::string, Verdict> expect;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError(path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline const json& params_of(const json& spec) {
  static const json empty = json::object();
  return spec.contains("params") ? spec.at("params") : empty;
}

inline std::size_t count_param(const json& p, const char* key, std::size_t dflt, std::size_t lo, std::size_t hi,
                               const std::string& path) {
  if (!p.contains(key)) return dflt;
  const auto& v = p.at(key);
  if (!v.is_number_unsigned()) throw SpecError(path + "." + key, "expected a nonnegative integer");
  const auto x = v.get<std::size_t>();
  if (x < lo || x > hi)
    throw SpecError(path + "." + key, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return x;
}

inline double real_param(const json& p, const char* key, double dflt, const std::string& path) {
  if (!p.contains(key)) return dflt;
  if (!p.at(key).is_number()) throw SpecError(path + "." + key, "expected a number");
  return p.at(key).get<double>();
}

inline DecayCertificate rate_param(const json& p, const std::string& path) {
  if (!p.contains("rate")) return DecayCertificate::power(1.0, 1.0, "1/n");
  return json_io::decode_certificate(p.at("rate"), path + ".rate");
}

inline std::vector<double> random_weights(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> w(n);
  for (auto& x : w) x = rng.uniform(lo, hi);
  return w;
}

inline SignedMeasure random_probability(Rng& rng, std::size_t n) {
  auto w = random_weights(rng, n, 0.1, 1.0);
  double s = 0.0;
  for (double x : w) s += x;
  for (auto& x : w) x /= s;
  return SignedMeasure(AtomSpace(n), w);
}

inline SignedMeasure measure_param(const json& p, const char* key, const std::string& path,
                                   const std::function<SignedMeasure()>& fallback) {
  return p.contains(key) ? json_io::decode_measure(p.at(key), path + "." + key) : fallback();
}

inline AtomFunction function_param(const json& p, const char* key, const std::string& path,
                                   const std::function<AtomFunction()>& fallback) {
  return p.contains(key) ? json_io::decode_function(p.at(key), path + "." + key) : fallback();
}

inline void require_space(const AtomSpace& a, const AtomSpace& b, const std::string& path, const char* what) {
  if (a.size() != b.size()) throw SpecError(path, std::string(what) + ": atom counts differ");
}

// Measure/function pair of the mixing kinds.
inline void build_mix(FamilyBundle& fam, const json& p, const std::string& path, Rng& rng, bool signed_kind) {
  const std::size_t atoms = count_param(p, "atoms", 8, 1, 24, path);
  const auto m = measure_param(p, "m", path, [&] { return random_probability(rng, atoms); });
  const auto mu = measure_param(p, "mu", path, [&] {
    return signed_kind ? SignedMeasure(AtomSpace(atoms), random_weights(rng, atoms, -1.0, 1.0))
                       : random_probability(rng, atoms);
  });
  require_space(m.space(), mu.space(), path, "m and mu");
  const auto f = function_param(p, "f", path, [&] { return AtomFunction(AtomSpace(m.size()), random_weights(rng, m.size(), -2.0, 2.0), 1); });
  require_space(m.space(), f.space(), path, "m and f");
  const auto rate = rate_param(p, path);
  fam.mf = json_io::build(path, [&] { return signed_kind ? signed_mix(m, mu, rate) : convex_mix(m, mu, rate); });
  if (p.contains("g") || !p.contains("f")) {
    const auto g = function_param(p, "g", path, [&] {
      return AtomFunction(AtomSpace(m.size()), random_weights(rng, m.size() * f.dim(), -1.0, 1.0), f.dim());
    });
    require_space(m.space(), g.space(), path, "m and g");
    fam.ff = json_io::build(path, [&] { return perturbed_function(f, g, rate); });
  } else {
    fam.ff = constant_function_family(f);
  }
}

inline DensityMeasure density_param(const json& p, const char* key, const std::string& path, DensityMeasure dflt) {
  return p.contains(key) ? json_io::decode_density(p.at(key), path + "." + key) : dflt;
}

inline DensityFamily density_family_param(const json& p, const std::string& path) {
  const auto m = density_param(p, "m", path, DensityMeasure::lebesgue());
  if (!p.contains("mu")) return constant_density_family(m, "density");
  return density_mix(m, json_io::decode_density(p.at("mu"), path + ".mu"), rate_param(p, path));
}

inline void apply_certificates(FamilyBundle& fam, const json& spec, const std::string& path) {
  if (!spec.contains("certificates")) return;
  const auto& cs = spec.at("certificates");
  if (!cs.is_array()) throw SpecError(path + ".certificates", "expected an array");
  for (std::size_t k = 0; k < cs.size(); ++k) {
    const std::string p = path + ".certificates[" + std::to_string(k) + "]";
    const auto target = json_io::field(cs[k], "target", p);
    if (!target.is_string()) throw SpecError(p + ".target", "expected a string");
    const auto cert = json_io::decode_certificate(cs[k], p);
    const auto t = target.get<std::string>();
    if (t == "tv" && fam.mf) fam.mf->tv_cert = cert;
    else if (t == "setwise" && fam.mf) fam.mf->setwise_cert = cert;
    else if (t == "sup" && fam.ff) fam.ff->sup_cert = cert;
    else if (t == "inmeasure" && fam.ff) fam.ff->inmeasure_cert = cert;
    else if (t == "equiconv" && fam.gf) fam.gf->equiconv_cert = cert;
    else if (t == "density_tv" && fam.df) fam.df->tv_cert = cert;
    else if (t == "step_sup" && fam.sf) fam.sf->sup_cert = cert;
    else if (t == "hausdorff" && fam.smf) fam.smf->hausdorff_cert = cert;
    else throw SpecError(p + ".target", "certificate target '" + t + "' does not apply to kind '" + fam.kind + "'");
  }
}

// Finite sequences given verbatim: m_1..m_L, f_1..f_L and limits.
inline void build_explicit(FamilyBundle& fam, const json& p, const std::string& path) {
  const auto& ms = json_io::field(p, "measures", path);
  if (!ms.is_array() || ms.empty()) throw SpecError(path + ".measures", "expected a nonempty array of measures");
  std::vector<SignedMeasure> seq;
  for (std::size_t k = 0; k < ms.size(); ++k)
    seq.push_back(json_io::decode_measure(ms[k], path + ".measures[" + std::to_string(k) + "]"));
  const auto lim = json_io::decode_measure(json_io::field(p, "limit", path), path + ".limit");
  const AtomSpace space = lim.space();
  for (std::size_t k = 0; k < seq.size(); ++k)
    require_space(space, seq[k].space(), path + ".measures[" + std::to_string(k) + "]", "measure");
  MeasureFamily mf;
  mf.name = fam.name;
  mf.space = space;
  mf.at = [seq](std::size_t n) { return seq.at(n - 1); };
  mf.limit = lim;
  mf.length = seq.size();
  mf.nonneg = std::all_of(seq.begin(), seq.end(), [](const SignedMeasure& m) { return m.is_nonnegative(); }) &&
              mf.limit.is_nonnegative();
  fam.mf = mf;
  std::vector<AtomFunction> fs;
  if (p.contains("functions")) {
    const auto& jf = p.at("functions");
    if (!jf.is_array() || jf.size() != seq.size())
      throw SpecError(path + ".functions", "expected one function per measure");
    for (std::size_t k = 0; k < jf.size(); ++k) {
      const auto f = json_io::decode_function(jf[k], path + ".functions[" + std::to_string(k) + "]");
      require_space(space, f.space(), path + ".functions[" + std::to_string(k) + "]", "function");
      fs.push_back(f);
    }
  }
  const auto flim = p.contains("f_limit") ? json_io::decode_function(p.at("f_limit"), path + ".f_limit")
                                          : AtomFunction::constant(space, 1.0);
  require_space(space, flim.space(), path + ".f_limit", "function");
  FunctionFamily ff;
  ff.name = fam.name;
  ff.space = space;
  if (fs.empty()) {
    ff = constant_function_family(flim, fam.name);
  } else {
    ff.at = [fs](std::size_t n) { return fs.at(n - 1); };
    ff.limit = flim;
    ff.length = fs.size();
  }
  fam.ff = ff;
}

}  // namespace detail

/// Builds the families of a spec {"kind", "name", "params", "certificates",
/// "expect", "test_set", "mode"}; random parameters draw from a stream
/// keyed by (seed, name).
inline FamilyBundle parse_family(const json& spec, std::uint64_t seed, const std::string& path = "family") {
  if (!spec.is_object()) throw SpecError(path, "expected a family object");
  const auto& kind_j = json_io::field(spec, "kind", path);
  if (!kind_j.is_string()) throw SpecError(path + ".kind", "expected a string");
  FamilyBundle fam;
  fam.kind = kind_j.get<std::string>();
  fam.name = spec.value("name", fam.kind);
  const auto& p = detail::params_of(spec);
  const std::string pp = path + ".params";
  if (!p.is_object()) throw SpecError(pp, "expected an object");
  Rng rng = Rng::stream(seed, detail::fnv1a(fam.name));

  if (fam.kind == "convex_mix" || fam.kind == "signed_mix") {
    detail::build_mix(fam, p, pp, rng, fam.kind == "signed_mix");
  } else if (fam.kind == "rademacher") {
    const auto level = static_cast<unsigned>(detail::count_param(p, "level", 10, 1, 16, pp));
    fam.mf = rademacher_family(level);
    fam.ff = constant_function_family(AtomFunction::constant(fam.mf->space, 1.0));
  } else if (fam.kind == "mass_escape" || fam.kind == "vacuous_uac") {
    const AtomSpace space(detail::count_param(p, "atoms", 16, 2, 24, pp));
    auto [mf, ff] = fam.kind == "mass_escape" ? mass_escape_family(space) : vacuous_uac_family(space);
    fam.mf = std::move(mf);
    fam.ff = std::move(ff);
  } else if (fam.kind == "multi_scaling") {
    const std::size_t atoms = detail::count_param(p, "atoms", 8, 1, 24, pp);
    const std::size_t dim = detail::count_param(p, "dim", 2, 1, kMaxBodyDim, pp);
    MultiMap g = p.contains("bodies") ? json_io::decode_multimap(p.at("bodies"), pp + ".bodies") : [&] {
      std::vector<Polytope> b;
      for (std::size_t i = 0; i < atoms; ++i) {
        std::vector<std::vector<double>> pts;
        for (int v = 0; v < 4; ++v) {
          std::vector<double> x(dim);
          for (auto& c : x) c = rng.uniform(-1.0, 1.0) / std::sqrt(static_cast<double>(dim));
          pts.push_back(std::move(x));
        }
        b.push_back(Polytope::from_points(pts));
      }
      return MultiMap(AtomSpace(atoms), std::move(b));
    }();
    const auto rate = detail::rate_param(p, pp);
    const auto m = detail::measure_param(p, "m", pp, [&] { return detail::random_probability(rng, g.space().size()); });
    detail::require_space(g.space(), m.space(), pp, "bodies and m");
    if (p.contains("mu")) {
      const auto mu = json_io::decode_measure(p.at("mu"), pp + ".mu");
      detail::require_space(g.space(), mu.space(), pp, "bodies and mu");
      fam.mf = json_io::build(pp, [&] { return convex_mix(m, mu, rate); });
    } else {
      fam.mf = constant_measure_family(m, "fixed");
    }
    fam.gf = json_io::build(pp, [&] { return scaling_multi_family(g, rate); });
  } else if (fam.kind == "multi_escape") {
    const AtomSpace space(detail::count_param(p, "atoms", 16, 2, 24, pp));
    const std::size_t dim = detail::count_param(p, "dim", 2, 1, kMaxBodyDim, pp);
    fam.gf = multi_mass_escape(space, dim);
    fam.mf = mass_escape_family(space).first;
  } else if (fam.kind == "mcshane_step") {
    const auto f = p.contains("f") ? json_io::decode_step(p.at("f"), pp + ".f")
                                   : StepFn::scalar({0.0, 0.5, 1.0}, {1.0, 2.0});
    const auto g = p.contains("g") ? json_io::decode_step(p.at("g"), pp + ".g")
                                   : StepFn(f.breaks(), std::vector<std::vector<double>>(f.cells(), std::vector<double>(f.dim(), 1.0)));
    if (f.dim() != g.dim()) throw SpecError(pp, "f and g have different dimensions");
    fam.sf = perturbed_step_family(f, g, detail::rate_param(p, pp));
    fam.df = detail::density_family_param(p, pp);
  } else if (fam.kind == "mcshane_drift") {
    fam.sf = json_io::build(pp, [&] {
      return drifting_step_family(detail::real_param(p, "point", 0.5, pp), detail::real_param(p, "left", 1.0, pp),
                                  detail::real_param(p, "right", 2.0, pp));
    });
    fam.df = detail::density_family_param(p, pp);
  } else if (fam.kind == "mcshane_jump") {
    fam.sf = json_io::build(pp, [&] { return jump_family(detail::real_param(p, "point", 0.5, pp)); });
    fam.df = detail::density_family_param(p, pp);
  } else if (fam.kind == "mcshane_interval") {
    const auto g = p.contains("multi") ? json_io::decode_step_multi(p.at("multi"), pp + ".multi")
                                       : StepMultiFn({0.0, 1.0}, {Polytope::interval(0.0, 1.0)});
    fam.smf = json_io::build(pp, [&] { return scaling_step_multi_family(g, detail::rate_param(p, pp)); });
    fam.df = detail::density_family_param(p, pp);
  } else if (fam.kind == "explicit") {
    detail::build_explicit(fam, p, pp);
  } else {
    throw SpecError(path + ".kind", "unknown family kind '" + fam.kind + "'");
  }

  for (auto* n : {fam.mf ? &fam.mf->name : nullptr, fam.ff ? &fam.ff->name : nullptr, fam.gf ? &fam.gf->name : nullptr,
                  fam.sf ? &fam.sf->name : nullptr, fam.df ? &fam.df->name : nullptr, fam.smf ? &fam.smf->name : nullptr})
    if (n) *n = fam.name;
  detail::apply_certificates(fam, spec, path);
  if (spec.contains("test_set")) {
    if (!fam.mf) throw SpecError(path + ".test_set", "kind has no atom space");
    fam.test_set = json_io::decode_set(spec.at("test_set"), fam.mf->space.size(), path + ".test_set");
  }
  if (spec.contains("mode")) {
    const auto m = spec.at("mode");
    if (m == "setwise") fam.mode = McMode::setwise;
    else if (m == "tv") fam.mode = McMode::tv;
    else throw SpecError(path + ".mode", "expected \"setwise\" or \"tv\"");
  }
  if (spec.contains("expect")) {
    const auto& e = spec.at("expect");
    if (!e.is_object()) throw SpecError(path + ".expect", "expected an object theorem -> verdict");
    for (const auto& [k, v] : e.items()) {
      if (std::find(theorem_ids().begin(), theorem_ids().end(), k) == theorem_ids().end())
        throw SpecError(path + ".expect." + k, "unknown theorem id");
      try {
        fam.expect[k] = verdict_from_string(v.get<std::string>());
      } catch (const std::exception& ex) {
        throw SpecError(path + ".expect." + k, ex.what());
      }
    }
  }
  return fam;
}

/// Spec given inline as JSON text, or as a path to a JSON file.
inline json load_spec_text(const std::string& path_or_inline, const std::filesystem::path& base = {}) {
  const auto first = path_or_inline.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && path_or_inline[first] == '{')
    return json_io::parse_text(path_or_inline, "inline spec");
  std::filesystem::path p(path_or_inline);
  if (p.is_relative() && !base.empty()) p = base / p;
  return json_io::parse_text(detail::read_file(p.string()), p.string());
}

namespace detail {

inline const MeasurableSet whole(const FamilyBundle& fam) {
  return fam.test_set ? *fam.test_set : MeasurableSet::full(fam.mf->space.size());
}

inline void need(bool ok, const FamilyBundle& fam, const std::string& theorem, const char* what) {
  if (!ok)
    throw SpecError("family '" + fam.name + "'",
                    "kind '" + fam.kind + "' provides no " + what + " required by theorem " + theorem);
}

}  // namespace detail

/// Runs one theorem checker on a family. Violated preconditions yield a
/// not_applicable report; invariant breaches propagate.
inline TheoremReport run_theorem(const std::string& id, const FamilyBundle& fam, std::size_t horizon, double tol) {
  auto na = [&](const std::string& why) {
    TheoremReport r;
    r.theorem = id;
    r.family = fam.name;
    r.tolerance = tol;
    r.verdict = Verdict::not_applicable;
    r.notes.push_back(why);
    return r;
  };
  const bool atoms = fam.mf && fam.ff;
  try {
    if (id == "p4") {
      detail::need(atoms, fam, id, "measure/function pair");
      return check_p4_equivalence(*fam.ff, *fam.mf, default_epsilon_grid(), horizon);
    }
    if (id == "th1") {
      detail::need(atoms, fam, id, "measure/function pair");
      return vitali_limit(*fam.ff, *fam.mf, detail::whole(fam), tol, horizon);
    }
    if (id == "th1s") {
      detail::need(atoms, fam, id, "measure/function pair");
      return signed_vitali(*fam.ff, *fam.mf, detail::whole(fam), tol, horizon);
    }
    if (id == "quest") {
      detail::need(atoms, fam, id, "measure/function pair");
      return domination_transfer(*fam.ff, *fam.mf, default_epsilon_grid(), horizon, tol);
    }
    if (id == "thmulti" || id == "thmulti2") {
      detail::need(fam.mf && (fam.gf || fam.ff), fam, id, "multifunction family");
      const auto gf = fam.gf ? *fam.gf : singleton_multi_family(*fam.ff);
      if (id == "thmulti") return check_thmulti(gf, *fam.mf, tol, horizon, {detail::whole(fam)});
      return check_thmulti2(gf, *fam.mf, tol, horizon);
    }
    if (id == "th2v") {
      detail::need(atoms, fam, id, "measure/function pair");
      return check_th2v(*fam.ff, *fam.mf, detail::whole(fam), tol, horizon);
    }
    if (id == "th1m") {
      detail::need(atoms, fam, id, "measure/function pair");
      return check_th1m(*fam.ff, *fam.mf, tol, horizon);
    }
    if (id == "thmcsequi") {
      detail::need(fam.sf && fam.df, fam, id, "step function/density family");
      McShaneOptions opt;
      opt.mode = fam.mode;
      return check_thmcsequi(*fam.sf, *fam.df, tol, horizon, opt);
    }
    if (id == "thmc") {
      detail::need(fam.smf && fam.df, fam, id, "step multifunction/density family");
      McShaneOptions opt;
      opt.mode = fam.mode;
      return check_thmc_multivalued(*fam.smf, *fam.df, tol, horizon, opt);
    }
  } catch (const PreconditionFailed& e) {
    return na(e.what());
  }
  throw SpecError("theorem", "unknown theorem id '" + id + "'");
}

// ---------------------------------------------------------------------------
// Gallery.

inline const std::vector<std::string>& gallery_ids() {
  static const std::vector<std::string> ids{"rem2_weak_not_tv", "mass_escape", "vacuous_uac", "straddled_jump"};
  return ids;
}

/// Reproduces a counterexample and reports pass iff its expected split of
/// verdicts is observed.
inline TheoremReport gallery(const std::string& id, unsigned level = 10) {
  TheoremReport r;
  r.theorem = "gallery/" + id;
  auto hyp = [&](std::string label, bool ok, json cert) {
    r.hypotheses.push_back({std::move(label), ok ? Verdict::holds : Verdict::fails, std::move(cert)});
  };
  if (id == "rem2_weak_not_tv") {
    const auto mf = rademacher_family(level);
    r.family = mf.name;
    r.tolerance = 1e-12;
    const unsigned coarse = std::min(3u, level - 1);
    const auto alg = Coarsening::dyadic(level, coarse);
    bool tv_one = true;
    auto tvs = json::array();
    for (std::size_t n = 1; n <= level; ++n) {
      const double tv = total_variation_distance(mf.at(n), mf.limit);
      tvs.push_back(tv);
      tv_one = tv_one && std::abs(tv - 1.0) <= 1e-12;
      r.curve.emplace_back(n, sup_set_gap_on(mf.at(n), mf.limit, alg));
    }
    r.final_gap = r.curve.back().second;
    hyp("tv distance |m_n - m|(Omega) = 1 for every n", tv_one, {{"tv", tvs}});
    hyp("sup gap over the level-" + std::to_string(coarse) + " dyadic algebra at n = " + std::to_string(level) + " is 0",
        r.final_gap <= 1e-12, {{"gap", r.final_gap}});
    r.notes.push_back("setwise convergence on the coarse algebra without convergence in total variation");
    r.notes.push_back("power-set sup gap at the last index: " + std::to_string(sup_set_gap(mf.at(level), mf.limit)));
  } else if (id == "mass_escape") {
    const AtomSpace space(16);
    auto [mf, ff] = mass_escape_family(space);
    r.family = mf.name;
    const auto ui = check_ui(ff, mf, kDefaultHorizon);
    const auto uac = uac_hypothesis("u.a.c.", ff, mf, default_epsilon_grid(), kDefaultHorizon);
    hyp("u.i. fails with a witness", ui.verdict == Verdict::fails, json(ui));
    hyp("u.a.c. fails", uac.verdict == Verdict::fails, uac.certificate);
    for (std::size_t n = 1; n <= kDefaultHorizon; ++n) r.curve.emplace_back(n, integrate(ff.at(n).abs(), mf.at(n)));
    r.final_gap = r.curve.back().second;
    r.notes.push_back("curve: integral of |f_n| dm_n stays at 1 while f_n -> 0 and m_n -> 0");
  } else if (id == "vacuous_uac") {
    const AtomSpace space(4);
    auto [mf, ff] = vacuous_uac_family(space);
    r.family = mf.name;
    const auto uac = uac_hypothesis("u.a.c.", ff, mf, default_epsilon_grid(), kDefaultHorizon);
    const auto bound = check_integral_bound(ff, mf, kDefaultHorizon);
    const auto ui = check_ui(ff, mf, kDefaultHorizon);
    hyp("u.a.c. holds", uac.verdict == Verdict::holds, uac.certificate);
    hyp("sup_n integral of |f_n| dm_n is unbounded", bound.verdict == Verdict::fails,
        {{"sup_all", bound.sup_all}, {"sup_quarter", bound.sup_quarter}});
    hyp("u.i. fails", ui.verdict == Verdict::fails, json(ui));
    for (std::size_t n = 1; n <= bound.values.size(); ++n) r.curve.emplace_back(n, bound.values[n - 1]);
    r.final_gap = r.curve.back().second;
  } else if (id == "straddled_jump") {
    const auto sf = jump_family(0.5);
    const auto df = constant_density_family(DensityMeasure::lebesgue(), "lebesgue");
    r.family = sf.name;
    const auto eq = check_equi_integrable(sf, df, 0.1, kDefaultHorizon);
    hyp("(m_n)-equi-integrability fails with a straddling partition", eq.verdict == Verdict::fails && eq.witness.has_value(),
        eq.evidence);
    const auto th = check_thmcsequi(sf, df, 1e-2, kDefaultHorizon);
    hyp("limit theorem does not assert its conclusion", th.verdict == Verdict::hypothesis_failed,
        {{"verdict", th.verdict}});
    r.curve = th.curve;
    r.final_gap = th.final_gap;
  } else {
    throw SpecError("gallery", "unknown id '" + id + "'");
  }
  r.verdict = r.all_hypotheses_hold() ? Verdict::pass : Verdict::fail;
  return r;
}

// ---------------------------------------------------------------------------
// Plot data.

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_plotdata(std::ostream& out, const std::vector<TheoremReport>& reports) {
  out << "n,gap,theorem,family\n";
  for (const auto& r : reports)
    for (const auto& [n, gap] : r.curve)
      out << n << ',' << format_double(gap) << ',' << csv_field(r.theorem) << ',' << csv_field(r.family) << '\n';
}

struct PlotRow {
  std::size_t n = 0;
  double gap = 0.0;
  std::string theorem;
  std::string family;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> f(1);
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        f.back() += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        f.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      f.emplace_back();
    } else {
      f.back() += c;
    }
  }
  return f;
}

inline std::vector<PlotRow> parse_plotdata(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "n,gap,theorem,family") throw SpecError("plot data", "missing header");
  std::vector<PlotRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw SpecError("plot data: line " + std::to_string(lineno), "expected 4 fields");
    rows.push_back({std::stoul(f[0]), std::stod(f[1]), f[2], f[3]});
  }
  return rows;
}

/// Reports held in a file: a single report or a suite document.
inline std::vector<TheoremReport> reports_from_json(const json& j) {
  std::vector<TheoremReport> out;
  try {
    if (j.contains("reports"))
      for (const auto& r : j.at("reports")) out.push_back(r.get<TheoremReport>());
    else
      out.push_back(j.get<TheoremReport>());
  } catch (const json::exception& e) {
    throw SpecError("report", e.what());
  }
  return out;
}

inline void emit_plotdata(const std::vector<TheoremReport>& reports, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_plotdata(out, reports);
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Campaigns.

struct CampaignConfig {
  std::uint64_t seed = 0;
  std::size_t horizon = kDefaultHorizon;
  double tolerance = 1e-2;
  std::vector<std::string> theorem_ids;
  std::vector<json> family_specs;
  std::vector<std::string> gallery;
  std::string output_path;
  std::string output_format = "json";
  std::size_t threads = 0;  // 0: hardware concurrency
};

inline CampaignConfig parse_config(const json& j, const std::filesystem::path& base = {}) {
  if (!j.is_object()) throw SpecError("config", "expected an object");
  CampaignConfig c;
  try {
    c.seed = j.value("seed", std::uint64_t{0});
    c.horizon = j.value("horizon", kDefaultHorizon);
    c.tolerance = j.value("tolerance", 1e-2);
    c.threads = j.value("threads", std::size_t{0});
    c.theorem_ids = j.value("theorem_ids", theorem_ids());
    c.gallery = j.value("gallery", std::vector<std::string>{});
    if (j.contains("output")) {
      c.output_path = j.at("output").value("path", std::string{});
      c.output_format = j.at("output").value("format", std::string("json"));
    }
  } catch (const json::exception& e) {
    throw SpecError("config", e.what());
  }
  if (c.horizon < 8) throw SpecError("config.horizon", "must be >= 8");
  if (!(c.tolerance > 0.0)) throw SpecError("config.tolerance", "must be > 0");
  if (c.output_format != "json" && c.output_format != "csv")
    throw SpecError("config.output.format", "expected \"json\" or \"csv\"");
  for (const auto& t : c.theorem_ids)
    if (std::find(theorem_ids().begin(), theorem_ids().end(), t) == theorem_ids().end())
      throw SpecError("config.theorem_ids", "unknown theorem id '" + t + "'");
  for (const auto& g : c.gallery)
    if (std::find(gallery_ids().begin(), gallery_ids().end(), g) == gallery_ids().end())
      throw SpecError("config.gallery", "unknown gallery id '" + g + "'");
  const auto& fs = json_io::field(j, "family_specs", "config");
  if (!fs.is_array()) throw SpecError("config.family_specs", "expected an array");
  for (std::size_t k = 0; k < fs.size(); ++k) {
    if (fs[k].is_string())
      c.family_specs.push_back(load_spec_text(fs[k].get<std::string>(), base));
    else
      c.family_specs.push_back(fs[k]);
  }
  return c;
}

struct Job {
  std::string theorem;
  std::size_t family = 0;  // index into the bundles; unused for gallery jobs
  std::string gallery;
  Verdict expected = Verdict::pass;
};

struct SuiteResult {
  std::vector<Job> jobs;
  std::vector<TheoremReport> reports;
  std::vector<std::string> families;
  bool all_expected = true;
  json document;
};

/// Jobs: every configured theorem on every family that supplies its inputs
/// and either lists the theorem under "expect" or has no "expect" at all,
/// then the gallery entries. Jobs run on a thread pool; results are
/// collected by job index, so output does not depend on scheduling.
inline SuiteResult run_suite(const CampaignConfig& c) {
  std::vector<FamilyBundle> fams;
  for (std::size_t k = 0; k < c.family_specs.size(); ++k)
    fams.push_back(parse_family(c.family_specs[k], c.seed, "config.family_specs[" + std::to_string(k) + "]"));
  SuiteResult out;
  for (std::size_t f = 0; f < fams.size(); ++f) {
    out.families.push_back(fams[f].name);
    for (const auto& t : c.theorem_ids) {
      if (!fams[f].expect.empty() && !fams[f].expect.count(t)) continue;
      const auto it = fams[f].expect.find(t);
      out.jobs.push_back({t, f, {}, it == fams[f].expect.end() ? Verdict::pass : it->second});
    }
  }
  for (const auto& g : c.gallery) out.jobs.push_back({"gallery", 0, g, Verdict::pass});

  out.reports.resize(out.jobs.size());
  std::vector<std::exception_ptr> errors(out.jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < out.jobs.size(); k = next++) {
      try {
        const auto& job = out.jobs[k];
        out.reports[k] = job.gallery.empty() ? run_theorem(job.theorem, fams[job.family], c.horizon, c.tolerance)
                                             : gallery(job.gallery);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads =
      std::max<std::size_t>(1, std::min<std::size_t>(c.threads ? c.threads : std::thread::hardware_concurrency(), out.jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  auto jobs = json::array();
  for (std::size_t k = 0; k < out.jobs.size(); ++k) {
    const auto& job = out.jobs[k];
    const bool ok = out.reports[k].verdict == job.expected;
    out.all_expected = out.all_expected && ok;
    jobs.push_back({{"theorem", job.gallery.empty() ? job.theorem : "gallery/" + job.gallery},
                    {"family", out.reports[k].family},
                    {"expected", job.expected},
                    {"verdict", out.reports[k].verdict},
                    {"ok", ok}});
  }
  out.document = {{"schema", kReportSchema},
                  {"seed", c.seed},
                  {"horizon", c.horizon},
                  {"tolerance", c.tolerance},
                  {"all_expected", out.all_expected},
                  {"jobs", std::move(jobs)},
                  {"reports", out.reports}};
  return out;
}

}  // namespace varmeas::harness
