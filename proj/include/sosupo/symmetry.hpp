#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sosupo/polynomial.hpp"

namespace sosupo {

/// Signed permutation a -> T a with (T a)_i = sign_i * a_{perm_i}.
///
/// Only signed permutations are representable: they cover the shear-flow reflections exactly and
/// compose without roundoff, so group closure can be checked with ==.
class LinearSymmetry {
 public:
  LinearSymmetry() = default;
  LinearSymmetry(std::vector<int> permutation, std::vector<int> signs);

  static LinearSymmetry identity(int dimension);
  /// Diagonal element diag(signs).
  static LinearSymmetry sign_flip(std::vector<int> signs);
  /// Accepts any matrix that is a signed permutation (entries in {-1, 0, 1}, one nonzero per row and column).
  static LinearSymmetry from_matrix(const Eigen::MatrixXd& matrix);

  int dimension() const { return static_cast<int>(permutation_.size()); }
  const std::vector<int>& permutation() const { return permutation_; }
  const std::vector<int>& signs() const { return signs_; }

  Eigen::MatrixXd matrix() const;
  std::vector<double> apply(std::span<const double> a) const;

  /// (this ∘ other)(a) = this(other(a)).
  LinearSymmetry compose(const LinearSymmetry& other) const;
  LinearSymmetry inverse() const;

  bool is_identity() const;
  bool is_diagonal() const;
  /// Smallest K >= 1 with T^K = identity.
  int order() const;

  std::string to_string() const;

  friend bool operator==(const LinearSymmetry& a, const LinearSymmetry& b) {
    return a.permutation_ == b.permutation_ && a.signs_ == b.signs_;
  }

 private:
  std::vector<int> permutation_;
  std::vector<int> signs_;
};

/// Finite group of signed permutations. Construction verifies identity, closure and finite order.
class SymmetryGroup {
 public:
  SymmetryGroup() = default;
  explicit SymmetryGroup(std::vector<LinearSymmetry> elements);

  /// Closure of the generators under composition.
  static SymmetryGroup generate(const std::vector<LinearSymmetry>& generators);
  static SymmetryGroup trivial(int dimension);

  int dimension() const { return elements_.empty() ? 0 : elements_.front().dimension(); }
  std::size_t size() const { return elements_.size(); }
  const std::vector<LinearSymmetry>& elements() const { return elements_; }
  /// Non-identity elements; a convenient generating set for checks.
  std::vector<LinearSymmetry> non_identity() const;

 private:
  std::vector<LinearSymmetry> elements_;
};

/// a -> p(T a), exact for signed permutations.
Polynomial compose_linear(const Polynomial& p, const LinearSymmetry& T);

/// Group average (1/|G|) sum_T p(T a); a linear, idempotent projection onto invariants.
Polynomial symmetrize(const Polynomial& p, const SymmetryGroup& G);

/// Max coefficient of f(T a) - T f(a) over components.
double equivariance_residual(std::span<const Polynomial> field, const LinearSymmetry& T);

}  // namespace sosupo
