#pragma once

// Finite measurable spaces (power-set sigma-algebra over n atoms), signed
// measures as weight vectors, Jordan/Hahn decompositions, total variation and
// integration of atom functions.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace varmeas {

/// Ceiling on atom counts for operations that enumerate all 2^n subsets.
inline constexpr std::size_t kMaxEnumerableAtoms = 24;

class AtomSpace {
 public:
  AtomSpace() = default;
  explicit AtomSpace(std::size_t n_atoms, std::vector<std::string> labels = {})
      : n_atoms_(n_atoms), labels_(std::move(labels)) {
    detail::require(n_atoms_ >= 1, "AtomSpace: n_atoms must be >= 1");
    detail::require(labels_.empty() || labels_.size() == n_atoms_,
                    "AtomSpace: label count must equal n_atoms");
  }

  std::size_t size() const noexcept { return n_atoms_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  bool enumerable() const noexcept { return n_atoms_ <= kMaxEnumerableAtoms; }

  // Labels are cosmetic; two spaces are the same iff they have the same atoms.
  friend bool operator==(const AtomSpace& a, const AtomSpace& b) noexcept {
    return a.n_atoms_ == b.n_atoms_;
  }

 private:
  std::size_t n_atoms_ = 1;
  std::vector<std::string> labels_;
};

inline void require_same_space(const AtomSpace& a, const AtomSpace& b, const char* where) {
  if (!(a == b))
    throw SpaceMismatch(std::string(where) + ": atom spaces differ (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
}

/// Subset of an atom space, stored as a bitmask of exactly n_atoms bits.
class MeasurableSet {
 public:
  MeasurableSet() = default;

  static MeasurableSet empty(std::size_t width) { return MeasurableSet(width); }

  static MeasurableSet full(std::size_t width) {
    MeasurableSet s(width);
    for (std::size_t i = 0; i < width; ++i) s.insert(i);
    return s;
  }

  /// Low `width` bits of `mask`; width must be <= 64.
  static MeasurableSet from_mask(std::size_t width, std::uint64_t mask) {
    detail::require(width <= 64, "MeasurableSet::from_mask: width > 64");
    MeasurableSet s(width);
    if (width < 64) mask &= (std::uint64_t{1} << width) - 1;
    if (!s.words_.empty()) s.words_[0] = mask;
    return s;
  }

  static MeasurableSet from_indices(std::size_t width, std::span<const std::size_t> idx) {
    MeasurableSet s(width);
    for (auto i : idx) {
      detail::require(i < width, "MeasurableSet: atom index out of range");
      s.insert(i);
    }
    return s;
  }

  std::size_t width() const noexcept { return width_; }

  bool contains(std::size_t i) const noexcept {
    return i < width_ && ((words_[i / 64] >> (i % 64)) & 1u) != 0;
  }
  void insert(std::size_t i) { words_.at(i / 64) |= std::uint64_t{1} << (i % 64); }
  void erase(std::size_t i) { words_.at(i / 64) &= ~(std::uint64_t{1} << (i % 64)); }

  std::size_t count() const noexcept {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }
  bool is_empty() const noexcept { return count() == 0; }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < width_; ++i)
      if (contains(i)) out.push_back(i);
    return out;
  }

  MeasurableSet complement() const {
    MeasurableSet s(width_);
    for (std::size_t i = 0; i < width_; ++i)
      if (!contains(i)) s.insert(i);
    return s;
  }

  friend MeasurableSet operator|(const MeasurableSet& a, const MeasurableSet& b) {
    check_width(a, b);
    MeasurableSet s = a;
    for (std::size_t k = 0; k < s.words_.size(); ++k) s.words_[k] |= b.words_[k];
    return s;
  }
  friend MeasurableSet operator&(const MeasurableSet& a, const MeasurableSet& b) {
    check_width(a, b);
    MeasurableSet s = a;
    for (std::size_t k = 0; k < s.words_.size(); ++k) s.words_[k] &= b.words_[k];
    return s;
  }
  friend bool operator==(const MeasurableSet&, const MeasurableSet&) = default;

  bool disjoint_from(const MeasurableSet& o) const { return (*this & o).is_empty(); }
  bool subset_of(const MeasurableSet& o) const { return (*this & o) == *this; }

 private:
  explicit MeasurableSet(std::size_t width) : width_(width), words_((width + 63) / 64, 0) {}

  static void check_width(const MeasurableSet& a, const MeasurableSet& b) {
    if (a.width_ != b.width_) throw SpaceMismatch("MeasurableSet: width mismatch");
  }

  std::size_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Finite signed measure: one real weight per atom.
class SignedMeasure {
 public:
  SignedMeasure() = default;
  SignedMeasure(AtomSpace space, std::vector<double> weights)
      : space_(std::move(space)), weights_(std::move(weights)) {
    detail::require(weights_.size() == space_.size(), "SignedMeasure: weight count != n_atoms");
    for (double w : weights_)
      detail::require(std::isfinite(w), "SignedMeasure: weights must be finite");
  }
  explicit SignedMeasure(std::vector<double> weights) : SignedMeasure(AtomSpace(weights.size()), weights) {}

  static SignedMeasure zero(const AtomSpace& space) {
    return SignedMeasure(space, std::vector<double>(space.size(), 0.0));
  }

  const AtomSpace& space() const noexcept { return space_; }
  std::size_t size() const noexcept { return weights_.size(); }
  std::span<const double> weights() const noexcept { return weights_; }
  double operator[](std::size_t i) const { return weights_.at(i); }

  bool is_nonnegative() const noexcept {
    return std::all_of(weights_.begin(), weights_.end(), [](double w) { return w >= 0.0; });
  }

  /// |m|(Omega).
  double total_variation() const noexcept {
    double s = 0.0;
    for (double w : weights_) s += std::abs(w);
    return s;
  }

  double mass() const noexcept {
    double s = 0.0;
    for (double w : weights_) s += w;
    return s;
  }

  SignedMeasure abs() const {
    std::vector<double> w(weights_.size());
    std::transform(weights_.begin(), weights_.end(), w.begin(), [](double x) { return std::abs(x); });
    return SignedMeasure(space_, std::move(w));
  }

  friend SignedMeasure operator+(const SignedMeasure& a, const SignedMeasure& b) {
    require_same_space(a.space_, b.space_, "SignedMeasure::operator+");
    std::vector<double> w(a.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = a.weights_[i] + b.weights_[i];
    return SignedMeasure(a.space_, std::move(w));
  }
  friend SignedMeasure operator-(const SignedMeasure& a, const SignedMeasure& b) {
    require_same_space(a.space_, b.space_, "SignedMeasure::operator-");
    std::vector<double> w(a.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = a.weights_[i] - b.weights_[i];
    return SignedMeasure(a.space_, std::move(w));
  }
  friend SignedMeasure operator*(double c, const SignedMeasure& a) {
    std::vector<double> w(a.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = c * a.weights_[i];
    return SignedMeasure(a.space_, std::move(w));
  }
  friend bool operator==(const SignedMeasure& a, const SignedMeasure& b) {
    return a.space_ == b.space_ && a.weights_ == b.weights_;
  }

 private:
  AtomSpace space_;
  std::vector<double> weights_;
};

struct JordanPair {
  SignedMeasure pos;
  SignedMeasure neg;
};

struct HahnSplit {
  MeasurableSet p_set;
  MeasurableSet n_set;
};

/// Scalar (dim == 1) or R^d valued function on atoms; values stored atom-major.
class AtomFunction {
 public:
  AtomFunction() = default;
  AtomFunction(AtomSpace space, std::vector<double> values, std::size_t dim = 1)
      : space_(std::move(space)), dim_(dim), values_(std::move(values)) {
    detail::require(dim_ >= 1, "AtomFunction: dim must be >= 1");
    detail::require(values_.size() == space_.size() * dim_,
                    "AtomFunction: value count must be n_atoms * dim");
    for (double v : values_) detail::require(std::isfinite(v), "AtomFunction: values must be finite");
  }
  explicit AtomFunction(std::vector<double> scalar_values)
      : AtomFunction(AtomSpace(scalar_values.size()), scalar_values, 1) {}

  static AtomFunction constant(const AtomSpace& space, double c) {
    return AtomFunction(space, std::vector<double>(space.size(), c));
  }

  const AtomSpace& space() const noexcept { return space_; }
  std::size_t dim() const noexcept { return dim_; }
  bool is_scalar() const noexcept { return dim_ == 1; }
  std::span<const double> values() const noexcept { return values_; }

  /// Scalar value at atom i (dim must be 1).
  double operator[](std::size_t i) const {
    if (dim_ != 1) throw DimensionMismatch("AtomFunction: scalar access on vector function");
    return values_.at(i);
  }
  std::span<const double> at(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * dim_, dim_);
  }

  /// Pointwise Euclidean norm |f(i)|.
  double norm_at(std::size_t i) const {
    double s = 0.0;
    for (double v : at(i)) s += v * v;
    return dim_ == 1 ? std::abs(values_[i]) : std::sqrt(s);
  }

  /// sup_i |f(i)| over the atoms of A (all atoms if A is omitted).
  double sup_norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < space_.size(); ++i) s = std::max(s, norm_at(i));
    return s;
  }
  double sup_norm(const MeasurableSet& a) const {
    double s = 0.0;
    for (std::size_t i = 0; i < space_.size(); ++i)
      if (a.contains(i)) s = std::max(s, norm_at(i));
    return s;
  }

  AtomFunction abs() const {
    std::vector<double> v(space_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = norm_at(i);
    return AtomFunction(space_, std::move(v));
  }

  /// Inner product with a fixed vector: atom i -> <u, f(i)>.
  AtomFunction project(std::span<const double> u) const {
    if (u.size() != dim_) throw DimensionMismatch("AtomFunction::project: dimension mismatch");
    std::vector<double> v(space_.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t k = 0; k < dim_; ++k) v[i] += u[k] * values_[i * dim_ + k];
    return AtomFunction(space_, std::move(v));
  }

  friend AtomFunction operator-(const AtomFunction& a, const AtomFunction& b) {
    require_same_space(a.space_, b.space_, "AtomFunction::operator-");
    if (a.dim_ != b.dim_) throw DimensionMismatch("AtomFunction::operator-: dimension mismatch");
    std::vector<double> v(a.values_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values_[i] - b.values_[i];
    return AtomFunction(a.space_, std::move(v), a.dim_);
  }
  friend bool operator==(const AtomFunction& a, const AtomFunction& b) {
    return a.space_ == b.space_ && a.dim_ == b.dim_ && a.values_ == b.values_;
  }

 private:
  AtomSpace space_;
  std::size_t dim_ = 1;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------

inline void require_set_on(const SignedMeasure& m, const MeasurableSet& a, const char* where) {
  if (a.width() != m.size())
    throw SpaceMismatch(std::string(where) + ": set width does not match the atom space");
}

/// m(A).
inline double eval(const SignedMeasure& m, const MeasurableSet& a) {
  require_set_on(m, a, "eval");
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (a.contains(i)) s += m[i];
  return s;
}

inline JordanPair jordan(const SignedMeasure& m) {
  std::vector<double> pos(m.size()), neg(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    pos[i] = std::max(m[i], 0.0);
    neg[i] = std::max(-m[i], 0.0);
  }
  return {SignedMeasure(m.space(), std::move(pos)), SignedMeasure(m.space(), std::move(neg))};
}

/// Sign split of the atoms; zero-weight atoms go to the positive set.
inline HahnSplit hahn(const SignedMeasure& m) {
  auto p = MeasurableSet::empty(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i] >= 0.0) p.insert(i);
  return {p, p.complement()};
}

/// |m1 - m2|(Omega).
inline double total_variation_distance(const SignedMeasure& m1, const SignedMeasure& m2) {
  require_same_space(m1.space(), m2.space(), "total_variation_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < m1.size(); ++i) s += std::abs(m1[i] - m2[i]);
  return s;
}

/// sup_A |m1(A) - m2(A)| over all subsets; attained at a Hahn set of m1 - m2.
inline double sup_set_gap(const SignedMeasure& m1, const SignedMeasure& m2) {
  require_same_space(m1.space(), m2.space(), "sup_set_gap");
  double pos = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < m1.size(); ++i) {
    const double d = m1[i] - m2[i];
    (d > 0.0 ? pos : neg) += std::abs(d);
  }
  return std::max(pos, neg);
}

/// A coarser algebra on an atom space, given by a block label per atom. The
/// generated algebra consists of all unions of blocks.
class Coarsening {
 public:
  Coarsening(std::size_t n_atoms, std::vector<std::size_t> block_of)
      : block_of_(std::move(block_of)) {
    detail::require(block_of_.size() == n_atoms, "Coarsening: one block label per atom");
    n_blocks_ = 0;
    for (auto b : block_of_) n_blocks_ = std::max(n_blocks_, b + 1);
  }

  /// Dyadic cells of level `coarse` inside a space of 2^fine equal cells.
  static Coarsening dyadic(unsigned fine, unsigned coarse) {
    detail::require(coarse <= fine && fine < 31, "Coarsening::dyadic: need coarse <= fine < 31");
    const std::size_t n = std::size_t{1} << fine;
    std::vector<std::size_t> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = i >> (fine - coarse);
    return Coarsening(n, std::move(b));
  }

  std::size_t n_atoms() const noexcept { return block_of_.size(); }
  std::size_t n_blocks() const noexcept { return n_blocks_; }
  std::size_t block_of(std::size_t atom) const { return block_of_.at(atom); }

  MeasurableSet block_union(std::uint64_t block_mask) const {
    auto s = MeasurableSet::empty(block_of_.size());
    for (std::size_t i = 0; i < block_of_.size(); ++i)
      if ((block_mask >> block_of_[i]) & 1u) s.insert(i);
    return s;
  }

 private:
  std::vector<std::size_t> block_of_;
  std::size_t n_blocks_ = 0;
};

/// sup over sets A of the coarse algebra of |m1(A) - m2(A)|.
inline double sup_set_gap_on(const SignedMeasure& m1, const SignedMeasure& m2, const Coarsening& alg) {
  require_same_space(m1.space(), m2.space(), "sup_set_gap_on");
  if (alg.n_atoms() != m1.size()) throw SpaceMismatch("sup_set_gap_on: coarsening width mismatch");
  std::vector<double> block(alg.n_blocks(), 0.0);
  for (std::size_t i = 0; i < m1.size(); ++i) block[alg.block_of(i)] += m1[i] - m2[i];
  double pos = 0.0, neg = 0.0;
  for (double d : block) (d > 0.0 ? pos : neg) += std::abs(d);
  return std::max(pos, neg);
}

inline void require_fn_on(const AtomFunction& f, const SignedMeasure& m, const char* where) {
  require_same_space(f.space(), m.space(), where);
}

/// Scalar integral: sum over atoms of A of f(i) * m(i).
inline double integrate(const AtomFunction& f, const SignedMeasure& m, const MeasurableSet& a) {
  require_fn_on(f, m, "integrate");
  require_set_on(m, a, "integrate");
  if (!f.is_scalar()) throw DimensionMismatch("integrate: vector function, use integrate_vector");
  double s = 0.0;
  const auto v = f.values();
  for (std::size_t i = 0; i < m.size(); ++i)
    if (a.contains(i)) s += v[i] * m[i];
  return s;
}

inline double integrate(const AtomFunction& f, const SignedMeasure& m) {
  return integrate(f, m, MeasurableSet::full(m.size()));
}

/// Componentwise integral of an R^d valued atom function.
inline std::vector<double> integrate_vector(const AtomFunction& f, const SignedMeasure& m,
                                            const MeasurableSet& a) {
  require_fn_on(f, m, "integrate_vector");
  require_set_on(m, a, "integrate_vector");
  std::vector<double> out(f.dim(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!a.contains(i)) continue;
    const auto fi = f.at(i);
    for (std::size_t k = 0; k < f.dim(); ++k) out[k] += fi[k] * m[i];
  }
  return out;
}

/// m{ i : |f(i) - g(i)| > delta }, computed against |m| when m is signed.
inline double deviation_mass(const AtomFunction& f, const AtomFunction& g, const SignedMeasure& m,
                             double delta) {
  require_fn_on(f, m, "deviation_mass");
  require_fn_on(g, m, "deviation_mass");
  const AtomFunction d = f - g;
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (d.norm_at(i) > delta) s += std::abs(m[i]);
  return s;
}

}  // namespace varmeas
