#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "bbmlab/common.hpp"
#include "bbmlab/normalization.hpp"

namespace bbm {

// Finite multiset of real positions, kept sorted ascending. Ties keep
// insertion order (stable sort), so results are deterministic even for
// measure-zero coincidences.
class PointMeasure {
 public:
  PointMeasure() = default;

  explicit PointMeasure(std::vector<double> atoms,
                        std::size_t cap = kDefaultAtomCap)
      : atoms_(std::move(atoms)) {
    check_cap(atoms_.size(), cap);
    std::stable_sort(atoms_.begin(), atoms_.end());
  }

  PointMeasure(std::initializer_list<double> atoms)
      : PointMeasure(std::vector<double>(atoms)) {}

  static PointMeasure from_sorted(std::vector<double> atoms,
                                  std::size_t cap = kDefaultAtomCap) {
    check_cap(atoms.size(), cap);
    PointMeasure pm;
    pm.atoms_ = std::move(atoms);
    return pm;
  }

  const std::vector<double>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  double operator[](std::size_t i) const { return atoms_[i]; }

  bool operator==(const PointMeasure&) const = default;

 private:
  static void check_cap(std::size_t n, std::size_t cap) {
    if (n > cap) throw Error("point measure cardinality exceeds cap");
  }
  std::vector<double> atoms_;
};

// Translation by c. Order and cardinality are preserved.
inline PointMeasure shift(const PointMeasure& pm, double c) {
  std::vector<double> out;
  out.reserve(pm.size());
  for (double x : pm.atoms()) out.push_back(x + c);
  return PointMeasure::from_sorted(std::move(out));
}

// Multiset union of finitely many measures.
inline PointMeasure superpose(std::span<const PointMeasure> pms,
                              std::size_t cap = kDefaultAtomCap) {
  std::size_t total = 0;
  for (const auto& pm : pms) total += pm.size();
  if (total > cap) throw Error("superpose: cardinality exceeds cap");
  std::vector<double> out;
  out.reserve(total);
  for (const auto& pm : pms)
    out.insert(out.end(), pm.atoms().begin(), pm.atoms().end());
  std::stable_sort(out.begin(), out.end());
  return PointMeasure::from_sorted(std::move(out));
}

inline PointMeasure superpose(std::initializer_list<PointMeasure> pms) {
  std::vector<PointMeasure> v(pms);
  return superpose(std::span<const PointMeasure>(v));
}

inline double extremum(const PointMeasure& pm, Direction dir) {
  if (pm.empty()) throw Error("no extremum of empty measure");
  return dir == Direction::Max ? pm.atoms().back() : pm.atoms().front();
}

// exp(-sum_i phi(x_i)) for nonnegative phi; lies in (0,1].
inline double laplace_functional(const PointMeasure& pm,
                                 const std::function<double(double)>& phi) {
  double s = 0.0;
  for (double x : pm.atoms()) s += phi(x);
  return std::exp(-s);
}

// Restriction to a closed window [lo, hi].
inline PointMeasure restrict_to(const PointMeasure& pm, double lo, double hi) {
  std::vector<double> out;
  for (double x : pm.atoms())
    if (x >= lo && x <= hi) out.push_back(x);
  return PointMeasure::from_sorted(std::move(out));
}

}  // namespace bbm
