#pragma once

// Verdicts and the per-theorem report that every checker produces.

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace varmeas {

enum class Verdict {
  holds,              // a hypothesis is certified
  fails,              // a hypothesis is refuted by an exact witness
  inconclusive,       // neither; checkers treat it as failure
  pass,               // theorem conclusion verified at tolerance
  fail,               // hypotheses held but the conclusion was not met
  hypothesis_failed,  // some hypothesis not certified; conclusion not asserted
  not_applicable,     // a structural precondition of the check is absent
};

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::fails: return "fails";
    case Verdict::inconclusive: return "inconclusive";
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::hypothesis_failed: return "hypothesis_failed";
    case Verdict::not_applicable: return "not_applicable";
  }
  return "?";
}

inline Verdict verdict_from_string(const std::string& s) {
  for (auto v : {Verdict::holds, Verdict::fails, Verdict::inconclusive, Verdict::pass, Verdict::fail,
                 Verdict::hypothesis_failed, Verdict::not_applicable})
    if (s == to_string(v)) return v;
  throw std::invalid_argument("unknown verdict '" + s + "'");
}

NLOHMANN_JSON_SERIALIZE_ENUM(Verdict, {
                                          {Verdict::holds, "holds"},
                                          {Verdict::fails, "fails"},
                                          {Verdict::inconclusive, "inconclusive"},
                                          {Verdict::pass, "pass"},
                                          {Verdict::fail, "fail"},
                                          {Verdict::hypothesis_failed, "hypothesis_failed"},
                                          {Verdict::not_applicable, "not_applicable"},
                                      })

struct HypothesisResult {
  std::string label;
  Verdict verdict = Verdict::inconclusive;
  nlohmann::json certificate;  // evidence: moduli, witnesses, certificate checks
};

using Curve = std::vector<std::pair<std::size_t, double>>;

struct TheoremReport {
  std::string theorem;
  std::string family;
  std::vector<HypothesisResult> hypotheses;
  Curve curve;  // n -> conclusion gap
  double final_gap = 0.0;
  double tolerance = 0.0;
  std::optional<double> tail_bound;  // certified bound on the gap at the final index
  Verdict verdict = Verdict::inconclusive;
  std::vector<std::string> specializations;
  std::vector<std::string> notes;
  std::vector<TheoremReport> parts;

  bool all_hypotheses_hold() const {
    for (const auto& h : hypotheses)
      if (h.verdict != Verdict::holds) return false;
    return true;
  }

  const HypothesisResult* hypothesis(const std::string& label) const {
    for (const auto& h : hypotheses)
      if (h.label == label) return &h;
    return nullptr;
  }

  /// Final verdict from hypotheses + gap: pass only if every hypothesis holds
  /// and the final gap is within tolerance.
  void settle() {
    if (!all_hypotheses_hold())
      verdict = Verdict::hypothesis_failed;
    else
      verdict = final_gap <= tolerance ? Verdict::pass : Verdict::fail;
  }
};

inline constexpr int kReportSchema = 1;

inline void to_json(nlohmann::json& j, const HypothesisResult& h) {
  j = nlohmann::json{{"label", h.label}, {"verdict", h.verdict}, {"certificate", h.certificate}};
}

inline void from_json(const nlohmann::json& j, HypothesisResult& h) {
  j.at("label").get_to(h.label);
  j.at("verdict").get_to(h.verdict);
  if (j.contains("certificate")) h.certificate = j.at("certificate");
}

inline void to_json(nlohmann::json& j, const TheoremReport& r) {
  j = nlohmann::json::object();
  j["schema"] = kReportSchema;
  j["theorem"] = r.theorem;
  j["family"] = r.family;
  j["hypotheses"] = r.hypotheses;
  auto curve = nlohmann::json::array();
  for (const auto& [n, g] : r.curve) curve.push_back(nlohmann::json::array({n, g}));
  j["curve"] = std::move(curve);
  j["final_gap"] = r.final_gap;
  j["tolerance"] = r.tolerance;
  j["tail_bound"] = r.tail_bound ? nlohmann::json(*r.tail_bound) : nlohmann::json(nullptr);
  j["verdict"] = r.verdict;
  j["specializations"] = r.specializations;
  j["notes"] = r.notes;
  j["parts"] = r.parts;
}

inline void from_json(const nlohmann::json& j, TheoremReport& r) {
  j.at("theorem").get_to(r.theorem);
  if (j.contains("family")) j.at("family").get_to(r.family);
  if (j.contains("hypotheses")) j.at("hypotheses").get_to(r.hypotheses);
  r.curve.clear();
  if (j.contains("curve"))
    for (const auto& p : j.at("curve")) r.curve.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<double>());
  r.final_gap = j.value("final_gap", 0.0);
  r.tolerance = j.value("tolerance", 0.0);
  if (j.contains("tail_bound") && !j.at("tail_bound").is_null()) r.tail_bound = j.at("tail_bound").get<double>();
  j.at("verdict").get_to(r.verdict);
  if (j.contains("specializations")) j.at("specializations").get_to(r.specializations);
  if (j.contains("notes")) j.at("notes").get_to(r.notes);
  if (j.contains("parts")) j.at("parts").get_to(r.parts);
}

}  // namespace varmeas
