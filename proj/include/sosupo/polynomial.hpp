#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sosupo {

/// Exponent tuple of a monomial in n variables a1..an.
class Monomial {
 public:
  Monomial() = default;
  /// The constant monomial 1 in `dimension` variables.
  explicit Monomial(int dimension);
  explicit Monomial(std::vector<int> exponents);

  static Monomial variable(int dimension, int index, int power = 1);

  int dimension() const { return static_cast<int>(exponents_.size()); }
  int degree() const { return degree_; }
  int operator[](int i) const { return exponents_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& exponents() const { return exponents_; }

  Monomial operator*(const Monomial& other) const;

  friend bool operator==(const Monomial& a, const Monomial& b) { return a.exponents_ == b.exponents_; }

  std::string to_string() const;

 private:
  std::vector<int> exponents_;
  int degree_ = 0;
};

/// Graded lexicographic order: lower total degree first, then a1 > a2 > ... within a degree,
/// so the degree-1 monomials of (x, y) come out as x, y.
struct GradedLexLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

/// Degree reported for the zero polynomial.
inline constexpr int kZeroPolynomialDegree = std::numeric_limits<int>::min();

/// Sparse multivariate polynomial with double coefficients. Zero coefficients are never stored.
class Polynomial {
 public:
  using TermMap = std::map<Monomial, double, GradedLexLess>;

  /// Coefficients with magnitude below this are dropped.
  static constexpr double kPruneThreshold = 1e-300;

  Polynomial() = default;
  explicit Polynomial(int dimension) : dimension_(dimension) {}

  static Polynomial constant(int dimension, double value);
  static Polynomial variable(int dimension, int index, double coefficient = 1.0);
  static Polynomial from_monomial(const Monomial& m, double coefficient = 1.0);

  int dimension() const { return dimension_; }
  int degree() const;
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }
  const TermMap& terms() const { return terms_; }

  double coefficient(const Monomial& m) const;
  double max_abs_coefficient() const;

  /// Accumulates c into the coefficient of m, pruning the term if it cancels.
  void add_term(const Monomial& m, double c);

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double s);
  Polynomial operator-() const;

  double evaluate(std::span<const double> point) const;

  /// `coeff * a1^e1 * ... * an^en` terms joined by + and -, graded-lex order.
  std::string to_string() const;

  /// Inverse of to_string(). Variables are a1..an; x, y, z alias a1, a2, a3.
  static Polynomial parse(std::string_view text, int dimension);

  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.dimension_ == b.dimension_ && a.terms_ == b.terms_;
  }

 private:
  void require_same_dimension(const Polynomial& other, const char* op) const;

  int dimension_ = 0;
  TermMap terms_;
};

Polynomial operator+(Polynomial a, const Polynomial& b);
Polynomial operator-(Polynomial a, const Polynomial& b);
Polynomial operator*(const Polynomial& a, const Polynomial& b);
Polynomial operator*(Polynomial a, double s);
Polynomial operator*(double s, Polynomial a);

Polynomial pow(const Polynomial& p, int exponent);

/// Largest |coefficient| of a - b.
double max_coefficient_difference(const Polynomial& a, const Polynomial& b);

Polynomial derivative(const Polynomial& p, int variable);
std::vector<Polynomial> grad(const Polynomial& p);

/// sum_i f_i dV/da_i.
Polynomial lie_derivative(std::span<const Polynomial> field, const Polynomial& V);

/// All monomials with min_degree <= degree <= max_degree, graded-lex order.
std::vector<Monomial> monomials_up_to_degree(int dimension, int max_degree, int min_degree = 0);

/// sum_i a_i^2 in `dimension` variables.
Polynomial squared_norm(int dimension);

/// Flattened evaluator for repeated numeric evaluation of a fixed polynomial.
class CompiledPolynomial {
 public:
  CompiledPolynomial() = default;
  explicit CompiledPolynomial(const Polynomial& p);

  int dimension() const { return dimension_; }
  double value(std::span<const double> point) const;
  /// Returns the value and writes the gradient into `gradient` (size n).
  double value_and_gradient(std::span<const double> point, std::span<double> gradient) const;

 private:
  int dimension_ = 0;
  int max_exponent_ = 0;
  std::vector<double> coefficients_;
  std::vector<int> exponents_;  // term-major, n per term
};

struct PointEvaluation {
  double value = 0.0;
  std::optional<std::vector<double>> gradient;
};

/// Evaluates p at every point. Throws DimensionMismatch on wrong point size and
/// std::domain_error on non-finite coordinates.
std::vector<PointEvaluation> eval_batch(const Polynomial& p, std::span<const std::vector<double>> points,
                                        bool with_gradient);

}  // namespace sosupo
