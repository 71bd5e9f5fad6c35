#pragma once

// JSON encodings of the core value types.

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convex_geom.hpp"
#include "mcshane.hpp"
#include "measure_core.hpp"
#include "setvalued_integral.hpp"

namespace varmeas {

/// Malformed JSON input; `where` is a JSON path or "line L, column C".
class SpecError : public Error {
 public:
  SpecError(const std::string& where, const std::string& what) : Error(where + ": " + what) {}
};

namespace json_io {

using nlohmann::json;

inline const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw SpecError(path, "expected an object");
  if (!j.contains(key)) throw SpecError(path, std::string("missing field '") + key + "'");
  return j.at(key);
}

inline std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw SpecError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw SpecError(path + "[" + std::to_string(k) + "]", "expected a number");
    out.push_back(j[k].get<double>());
  }
  return out;
}

inline std::vector<std::vector<double>> rows(const json& j, const std::string& path) {
  if (!j.is_array()) throw SpecError(path, "expected an array of arrays");
  std::vector<std::vector<double>> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(numbers(j[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

// Runs a constructor and maps its argument errors to a path-tagged SpecError.
template <class F>
auto build(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const SpecError&) {
    throw;
  } catch (const Error& e) {
    throw SpecError(path, e.what());
  }
}

// --- SignedMeasure {"atoms": n, "weights": [...]}

inline json encode(const SignedMeasure& m) {
  return {{"atoms", m.size()}, {"weights", std::vector<double>(m.weights().begin(), m.weights().end())}};
}

inline SignedMeasure decode_measure(const json& j, const std::string& path = "measure") {
  const auto w = numbers(field(j, "weights", path), path + ".weights");
  if (j.contains("atoms") && j.at("atoms") != w.size())
    throw SpecError(path, "'atoms' does not match the number of weights");
  return build(path, [&] { return SignedMeasure(AtomSpace(w.size()), w); });
}

// --- MeasurableSet as sorted atom indices

inline json encode(const MeasurableSet& a) { return a.indices(); }

inline MeasurableSet decode_set(const json& j, std::size_t width, const std::string& path = "set") {
  if (!j.is_array()) throw SpecError(path, "expected an array of atom indices");
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number_unsigned()) throw SpecError(path + "[" + std::to_string(k) + "]", "expected an atom index");
    idx.push_back(j[k].get<std::size_t>());
  }
  return build(path, [&] { return MeasurableSet::from_indices(width, idx); });
}

// --- AtomFunction: plain array (scalar) or {"dim": d, "values": [[...],...]}

inline AtomFunction decode_function(const json& j, const std::string& path = "function") {
  if (j.is_array()) {
    const auto v = numbers(j, path);
    return build(path, [&] { return AtomFunction(AtomSpace(v.size()), v, 1); });
  }
  const auto vals = rows(field(j, "values", path), path + ".values");
  std::vector<double> flat;
  for (const auto& r : vals) flat.insert(flat.end(), r.begin(), r.end());
  const std::size_t dim = vals.empty() ? 1 : vals.front().size();
  return build(path, [&] { return AtomFunction(AtomSpace(vals.size()), flat, dim); });
}

inline json encode(const AtomFunction& f) {
  json vals = json::array();
  for (std::size_t i = 0; i < f.space().size(); ++i) {
    const auto v = f.at(i);
    vals.push_back(std::vector<double>(v.begin(), v.end()));
  }
  return {{"dim", f.dim()}, {"values", std::move(vals)}};
}

// --- Polytope {"dim": d, "vertices": [[...],...]}

inline json encode(const Polytope& c) {
  json verts = json::array();
  for (std::size_t k = 0; k < c.vertex_count(); ++k) {
    const auto v = c.vertex(k);
    verts.push_back(std::vector<double>(v.begin(), v.end()));
  }
  return {{"dim", c.dim()}, {"vertices", std::move(verts)}};
}

inline Polytope decode_polytope(const json& j, const std::string& path = "polytope") {
  const auto verts = rows(field(j, "vertices", path), path + ".vertices");
  if (verts.empty()) throw SpecError(path, "a polytope needs at least one vertex");
  if (j.contains("dim") && j.at("dim") != verts.front().size())
    throw SpecError(path, "'dim' does not match the vertex dimension");
  return build(path, [&] { return Polytope::from_points(verts); });
}

// --- MultiMap {"atoms": n, "dim": d, "bodies": [polytope,...]}

inline json encode(const MultiMap& g) {
  json bodies = json::array();
  for (const auto& b : g.bodies()) bodies.push_back(encode(b));
  return {{"atoms", g.space().size()}, {"dim", g.dim()}, {"bodies", std::move(bodies)}};
}

inline MultiMap decode_multimap(const json& j, const std::string& path = "multimap") {
  const auto& b = field(j, "bodies", path);
  if (!b.is_array() || b.empty()) throw SpecError(path + ".bodies", "expected a nonempty array of polytopes");
  std::vector<Polytope> bodies;
  for (std::size_t k = 0; k < b.size(); ++k) bodies.push_back(decode_polytope(b[k], path + ".bodies[" + std::to_string(k) + "]"));
  if (j.contains("atoms") && j.at("atoms") != bodies.size())
    throw SpecError(path, "'atoms' does not match the number of bodies");
  if (j.contains("dim") && j.at("dim") != bodies.front().dim())
    throw SpecError(path, "'dim' does not match the body dimension");
  return build(path, [&] { return MultiMap(AtomSpace(bodies.size()), std::move(bodies)); });
}

// --- StepFn {"breaks": [...], "values": [[...],...]}; scalar values may be plain numbers

inline json encode(const StepFn& f) {
  json vals = json::array();
  for (std::size_t k = 0; k < f.cells(); ++k) {
    const auto v = f.value(k);
    vals.push_back(std::vector<double>(v.begin(), v.end()));
  }
  return {{"breaks", f.breaks()}, {"values", std::move(vals)}};
}

inline StepFn decode_step(const json& j, const std::string& path = "step") {
  const auto br = numbers(field(j, "breaks", path), path + ".breaks");
  const auto& v = field(j, "values", path);
  std::vector<std::vector<double>> vals;
  if (v.is_array() && !v.empty() && v.front().is_number()) {
    for (double x : numbers(v, path + ".values")) vals.push_back({x});
  } else {
    vals = rows(v, path + ".values");
  }
  if (vals.empty()) throw SpecError(path + ".values", "expected one value per cell");
  return build(path, [&] { return StepFn(br, vals); });
}

// --- DensityMeasure {"breaks": [...], "densities": [...]}

inline json encode(const DensityMeasure& m) { return {{"breaks", m.breaks()}, {"densities", m.densities()}}; }

inline DensityMeasure decode_density(const json& j, const std::string& path = "density") {
  const auto br = numbers(field(j, "breaks", path), path + ".breaks");
  const auto d = numbers(field(j, "densities", path), path + ".densities");
  return build(path, [&] { return DensityMeasure(br, d); });
}

// --- Gauge {"breaks": [...], "radii": [...]}

inline json encode(const Gauge& g) { return {{"breaks", g.breaks()}, {"radii", g.radii()}}; }

inline Gauge decode_gauge(const json& j, const std::string& path = "gauge") {
  const auto br = numbers(field(j, "breaks", path), path + ".breaks");
  const auto r = numbers(field(j, "radii", path), path + ".radii");
  return build(path, [&] { return Gauge(br, r); });
}

// --- StepMultiFn {"breaks": [...], "bodies": [polytope,...]}

inline json encode(const StepMultiFn& g) {
  json bodies = json::array();
  for (const auto& b : g.bodies) bodies.push_back(encode(b));
  return {{"breaks", g.breaks}, {"bodies", std::move(bodies)}};
}

inline StepMultiFn decode_step_multi(const json& j, const std::string& path = "step_multi") {
  const auto br = numbers(field(j, "breaks", path), path + ".breaks");
  const auto& b = field(j, "bodies", path);
  if (!b.is_array() || b.empty()) throw SpecError(path + ".bodies", "expected a nonempty array of polytopes");
  std::vector<Polytope> bodies;
  for (std::size_t k = 0; k < b.size(); ++k) bodies.push_back(decode_polytope(b[k], path + ".bodies[" + std::to_string(k) + "]"));
  return build(path, [&] { return StepMultiFn(br, std::move(bodies)); });
}

// --- DecayCertificate {"terms": [...]}

inline DecayCertificate decode_certificate(const json& j, const std::string& path = "certificate") {
  field(j, "terms", path);
  return build(path, [&] { return j.get<DecayCertificate>(); });
}

/// Parses text, reporting syntax errors as "line L, column C".
inline json parse_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = e.byte == 0 ? 0 : std::min(e.byte - 1, text.size());
    for (std::size_t k = 0; k < stop; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    if (const auto p = msg.find("syntax error"); p != std::string::npos) msg = msg.substr(p);
    throw SpecError(source + ": line " + std::to_string(line) + ", column " + std::to_string(col), msg);
  }
}

}  // namespace json_io
}  // namespace varmeas
