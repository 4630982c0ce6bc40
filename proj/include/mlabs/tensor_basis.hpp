#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mlabs/bspline.hpp"
#include "mlabs/errors.hpp"

namespace mlabs {

/// One univariate factor of a tensor-product atom. Variable indices are
/// zero-based internally; the CLI and files are zero-based as well.
struct AtomFactor {
  int variable;
  KnotSequence knots;

  int degree() const { return knots.degree(); }
  bool operator==(const AtomFactor&) const = default;
};

/// Structural part of an atom: interaction order, variables, degrees, knots.
/// Factors are kept sorted by variable so that two atoms built from the same
/// factor set compare equal regardless of construction order.
class AtomStructure {
 public:
  AtomStructure() = default;

  explicit AtomStructure(std::vector<AtomFactor> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) {
      throw InputError("basis atom needs at least one factor");
    }
    std::sort(factors_.begin(), factors_.end(),
              [](const AtomFactor& a, const AtomFactor& b) { return a.variable < b.variable; });
    for (std::size_t l = 0; l < factors_.size(); ++l) {
      if (factors_[l].variable < 0) throw InputError("negative variable index");
      if (l > 0 && factors_[l].variable == factors_[l - 1].variable) {
        throw InputError("atom variables must be distinct");
      }
    }
  }

  int interaction_order() const { return static_cast<int>(factors_.size()); }
  const std::vector<AtomFactor>& factors() const { return factors_; }
  int max_variable() const { return factors_.empty() ? -1 : factors_.back().variable; }

  std::vector<int> variables() const {
    std::vector<int> out;
    out.reserve(factors_.size());
    for (const auto& f : factors_) out.push_back(f.variable);
    return out;
  }

  std::vector<int> degrees() const {
    std::vector<int> out;
    out.reserve(factors_.size());
    for (const auto& f : factors_) out.push_back(f.degree());
    return out;
  }

  bool operator==(const AtomStructure&) const = default;

 private:
  std::vector<AtomFactor> factors_;
};

/// A tensor-product basis term together with its coefficient.
struct BasisAtom {
  AtomStructure structure;
  double coefficient = 0.0;

  bool operator==(const BasisAtom&) const = default;
};

/// Product of the univariate B-splines, coefficient excluded.
inline double eval_atom(const AtomStructure& atom, std::span<const double> x) {
  if (atom.max_variable() >= static_cast<int>(x.size())) {
    throw InputError("atom references a variable beyond the input dimension");
  }
  double value = 1.0;
  for (const auto& f : atom.factors()) {
    value *= eval_bspline(f.knots, x[static_cast<std::size_t>(f.variable)]);
    if (value == 0.0) break;
  }
  return value;
}

inline double eval_atom(const BasisAtom& atom, std::span<const double> x) {
  return eval_atom(atom.structure, x);
}

/// Row-major n x p design stored as an Eigen matrix.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Evaluates the atom at every row of X.
inline Vector design_column(const AtomStructure& atom, const Matrix& X) {
  if (atom.max_variable() >= X.cols()) {
    throw InputError("design matrix has fewer columns than the atom requires");
  }
  const Eigen::Index n = X.rows();
  Vector col = Vector::Ones(n);
  for (const auto& f : atom.factors()) {
    const Interval support = bspline_support(f.knots);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (col[i] == 0.0) continue;
      const double xv = X(i, f.variable);
      col[i] = support.contains(xv) ? col[i] * eval_bspline(f.knots, xv) : 0.0;
    }
  }
  return col;
}

inline Vector design_column(const BasisAtom& atom, const Matrix& X) {
  return design_column(atom.structure, X);
}

}  // namespace mlabs
