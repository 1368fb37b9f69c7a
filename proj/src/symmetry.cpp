#include "sosupo/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sosupo/errors.hpp"

namespace sosupo {

LinearSymmetry::LinearSymmetry(std::vector<int> permutation, std::vector<int> signs)
    : permutation_(std::move(permutation)), signs_(std::move(signs)) {
  if (permutation_.size() != signs_.size()) throw DimensionMismatch("LinearSymmetry: permutation/sign size mismatch");
  std::vector<bool> seen(permutation_.size(), false);
  for (std::size_t i = 0; i < permutation_.size(); ++i) {
    int p = permutation_[i];
    if (p < 0 || static_cast<std::size_t>(p) >= permutation_.size() || seen[static_cast<std::size_t>(p)]) {
      throw std::invalid_argument("LinearSymmetry: not a permutation");
    }
    seen[static_cast<std::size_t>(p)] = true;
    if (signs_[i] != 1 && signs_[i] != -1) throw std::invalid_argument("LinearSymmetry: signs must be +-1");
  }
}

LinearSymmetry LinearSymmetry::identity(int dimension) {
  std::vector<int> perm(static_cast<std::size_t>(dimension));
  for (int i = 0; i < dimension; ++i) perm[static_cast<std::size_t>(i)] = i;
  return LinearSymmetry(std::move(perm), std::vector<int>(static_cast<std::size_t>(dimension), 1));
}

LinearSymmetry LinearSymmetry::sign_flip(std::vector<int> signs) {
  std::vector<int> perm(signs.size());
  for (std::size_t i = 0; i < signs.size(); ++i) perm[i] = static_cast<int>(i);
  return LinearSymmetry(std::move(perm), std::move(signs));
}

LinearSymmetry LinearSymmetry::from_matrix(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() != matrix.cols()) throw DimensionMismatch("LinearSymmetry::from_matrix: matrix not square");
  const auto n = static_cast<int>(matrix.rows());
  std::vector<int> perm(static_cast<std::size_t>(n), -1);
  std::vector<int> signs(static_cast<std::size_t>(n), 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double v = matrix(i, j);
      if (v == 0.0) continue;
      if ((v != 1.0 && v != -1.0) || perm[static_cast<std::size_t>(i)] != -1) {
        throw std::invalid_argument("LinearSymmetry::from_matrix: only signed permutation matrices are supported");
      }
      perm[static_cast<std::size_t>(i)] = j;
      signs[static_cast<std::size_t>(i)] = v > 0 ? 1 : -1;
    }
    if (perm[static_cast<std::size_t>(i)] == -1) throw std::invalid_argument("LinearSymmetry::from_matrix: singular");
  }
  return LinearSymmetry(std::move(perm), std::move(signs));
}

Eigen::MatrixXd LinearSymmetry::matrix() const {
  const int n = dimension();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) m(i, permutation_[static_cast<std::size_t>(i)]) = signs_[static_cast<std::size_t>(i)];
  return m;
}

std::vector<double> LinearSymmetry::apply(std::span<const double> a) const {
  if (static_cast<int>(a.size()) != dimension()) throw DimensionMismatch("LinearSymmetry::apply: dimension");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = signs_[i] * a[static_cast<std::size_t>(permutation_[i])];
  }
  return out;
}

LinearSymmetry LinearSymmetry::compose(const LinearSymmetry& other) const {
  if (other.dimension() != dimension()) throw DimensionMismatch("LinearSymmetry::compose: dimension");
  // (T S a)_i = t_i (S a)_{p_i} = t_i s_{p_i} a_{q_{p_i}}
  std::vector<int> perm(permutation_.size());
  std::vector<int> signs(permutation_.size());
  for (std::size_t i = 0; i < permutation_.size(); ++i) {
    auto p = static_cast<std::size_t>(permutation_[i]);
    perm[i] = other.permutation_[p];
    signs[i] = signs_[i] * other.signs_[p];
  }
  return LinearSymmetry(std::move(perm), std::move(signs));
}

LinearSymmetry LinearSymmetry::inverse() const {
  // T^T for a signed permutation.
  std::vector<int> perm(permutation_.size());
  std::vector<int> signs(permutation_.size());
  for (std::size_t i = 0; i < permutation_.size(); ++i) {
    auto p = static_cast<std::size_t>(permutation_[i]);
    perm[p] = static_cast<int>(i);
    signs[p] = signs_[i];
  }
  return LinearSymmetry(std::move(perm), std::move(signs));
}

bool LinearSymmetry::is_identity() const { return *this == identity(dimension()); }

bool LinearSymmetry::is_diagonal() const {
  for (std::size_t i = 0; i < permutation_.size(); ++i) {
    if (permutation_[i] != static_cast<int>(i)) return false;
  }
  return true;
}

int LinearSymmetry::order() const {
  LinearSymmetry power = *this;
  // Signed permutations of n symbols have order at most 2 * lcm of cycle lengths; bound generously.
  for (int k = 1; k <= 100000; ++k) {
    if (power.is_identity()) return k;
    power = power.compose(*this);
  }
  throw std::logic_error("LinearSymmetry::order: no finite order found");
}

std::string LinearSymmetry::to_string() const {
  std::string out = "(";
  for (std::size_t i = 0; i < permutation_.size(); ++i) {
    if (i) out += ", ";
    out += (signs_[i] < 0 ? "-a" : "a") + std::to_string(permutation_[i] + 1);
  }
  return out + ")";
}

SymmetryGroup::SymmetryGroup(std::vector<LinearSymmetry> elements) : elements_(std::move(elements)) {
  if (elements_.empty()) throw std::invalid_argument("SymmetryGroup: empty element list");
  const int n = elements_.front().dimension();
  auto contains = [&](const LinearSymmetry& t) {
    return std::find(elements_.begin(), elements_.end(), t) != elements_.end();
  };
  for (const auto& t : elements_) {
    if (t.dimension() != n) throw DimensionMismatch("SymmetryGroup: mixed dimensions");
  }
  if (!contains(LinearSymmetry::identity(n))) throw std::invalid_argument("SymmetryGroup: identity missing");
  for (const auto& a : elements_) {
    (void)a.order();
    for (const auto& b : elements_) {
      if (!contains(a.compose(b))) {
        throw std::invalid_argument("SymmetryGroup: not closed under composition (" + a.to_string() + " o " +
                                    b.to_string() + ")");
      }
    }
  }
}

SymmetryGroup SymmetryGroup::generate(const std::vector<LinearSymmetry>& generators) {
  if (generators.empty()) throw std::invalid_argument("SymmetryGroup::generate: no generators");
  const int n = generators.front().dimension();
  std::vector<LinearSymmetry> elements{LinearSymmetry::identity(n)};
  for (std::size_t frontier = 0; frontier < elements.size(); ++frontier) {
    for (const auto& g : generators) {
      LinearSymmetry next = g.compose(elements[frontier]);
      if (std::find(elements.begin(), elements.end(), next) == elements.end()) elements.push_back(next);
    }
  }
  return SymmetryGroup(std::move(elements));
}

SymmetryGroup SymmetryGroup::trivial(int dimension) {
  return SymmetryGroup(std::vector<LinearSymmetry>{LinearSymmetry::identity(dimension)});
}

std::vector<LinearSymmetry> SymmetryGroup::non_identity() const {
  std::vector<LinearSymmetry> out;
  for (const auto& t : elements_) {
    if (!t.is_identity()) out.push_back(t);
  }
  return out;
}

Polynomial compose_linear(const Polynomial& p, const LinearSymmetry& T) {
  if (p.dimension() != T.dimension()) throw DimensionMismatch("compose_linear: dimension mismatch");
  const int n = p.dimension();
  Polynomial out(n);
  std::vector<int> exps(static_cast<std::size_t>(n));
  for (const auto& [m, c] : p.terms()) {
    std::fill(exps.begin(), exps.end(), 0);
    int sign = 1;
    for (int j = 0; j < n; ++j) {
      int e = m[j];
      if (e == 0) continue;
      exps[static_cast<std::size_t>(T.permutation()[static_cast<std::size_t>(j)])] += e;
      if (T.signs()[static_cast<std::size_t>(j)] < 0 && (e % 2 == 1)) sign = -sign;
    }
    out.add_term(Monomial(exps), sign * c);
  }
  return out;
}

Polynomial symmetrize(const Polynomial& p, const SymmetryGroup& G) {
  if (G.size() == 0) return p;
  if (p.dimension() != G.dimension()) throw DimensionMismatch("symmetrize: dimension mismatch");
  Polynomial sum(p.dimension());
  for (const auto& T : G.elements()) sum += compose_linear(p, T);
  sum *= 1.0 / static_cast<double>(G.size());
  return sum;
}

double equivariance_residual(std::span<const Polynomial> field, const LinearSymmetry& T) {
  if (static_cast<int>(field.size()) != T.dimension()) throw DimensionMismatch("equivariance_residual: dimension");
  double worst = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    Polynomial lhs = compose_linear(field[i], T);
    Polynomial rhs = field[static_cast<std::size_t>(T.permutation()[i])] * static_cast<double>(T.signs()[i]);
    worst = std::max(worst, max_coefficient_difference(lhs, rhs));
  }
  return worst;
}

}  // namespace sosupo
