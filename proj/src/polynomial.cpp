#include "sosupo/polynomial.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

#include "sosupo/errors.hpp"

namespace sosupo {

Monomial::Monomial(int dimension) : exponents_(static_cast<std::size_t>(dimension), 0) {}

Monomial::Monomial(std::vector<int> exponents) : exponents_(std::move(exponents)) {
  for (int e : exponents_) {
    if (e < 0) throw std::invalid_argument("Monomial: negative exponent");
    degree_ += e;
  }
}

Monomial Monomial::variable(int dimension, int index, int power) {
  std::vector<int> e(static_cast<std::size_t>(dimension), 0);
  e.at(static_cast<std::size_t>(index)) = power;
  return Monomial(std::move(e));
}

Monomial Monomial::operator*(const Monomial& other) const {
  if (other.dimension() != dimension()) throw DimensionMismatch("Monomial product: dimension mismatch");
  Monomial out = *this;
  for (std::size_t i = 0; i < exponents_.size(); ++i) out.exponents_[i] += other.exponents_[i];
  out.degree_ = degree_ + other.degree_;
  return out;
}

std::string Monomial::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < exponents_.size(); ++i) {
    if (exponents_[i] == 0) continue;
    if (!out.empty()) out += '*';
    out += 'a' + std::to_string(i + 1);
    if (exponents_[i] > 1) out += '^' + std::to_string(exponents_[i]);
  }
  return out.empty() ? "1" : out;
}

bool GradedLexLess::operator()(const Monomial& a, const Monomial& b) const {
  if (a.degree() != b.degree()) return a.degree() < b.degree();
  // Larger leading exponent first within a degree.
  return std::lexicographical_compare(b.exponents().begin(), b.exponents().end(), a.exponents().begin(),
                                      a.exponents().end());
}

Polynomial Polynomial::constant(int dimension, double value) {
  Polynomial p(dimension);
  p.add_term(Monomial(dimension), value);
  return p;
}

Polynomial Polynomial::variable(int dimension, int index, double coefficient) {
  Polynomial p(dimension);
  p.add_term(Monomial::variable(dimension, index), coefficient);
  return p;
}

Polynomial Polynomial::from_monomial(const Monomial& m, double coefficient) {
  Polynomial p(m.dimension());
  p.add_term(m, coefficient);
  return p;
}

int Polynomial::degree() const {
  if (terms_.empty()) return kZeroPolynomialDegree;
  return terms_.rbegin()->first.degree();
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::max_abs_coefficient() const {
  double out = 0.0;
  for (const auto& [m, c] : terms_) out = std::max(out, std::abs(c));
  return out;
}

void Polynomial::add_term(const Monomial& m, double c) {
  if (m.dimension() != dimension_) throw DimensionMismatch("Polynomial::add_term: dimension mismatch");
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(m, c);
  if (!inserted) it->second += c;
  if (std::abs(it->second) < kPruneThreshold) terms_.erase(it);
}

void Polynomial::require_same_dimension(const Polynomial& other, const char* op) const {
  if (other.dimension_ != dimension_) {
    throw DimensionMismatch(std::string("Polynomial ") + op + ": dimensions " + std::to_string(dimension_) +
                            " and " + std::to_string(other.dimension_));
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  require_same_dimension(other, "add");
  for (const auto& [m, c] : other.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  require_same_dimension(other, "sub");
  for (const auto& [m, c] : other.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= s;
    if (std::abs(it->second) < kPruneThreshold) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
  return *this;
}

Polynomial Polynomial::operator-() const {
  Polynomial out = *this;
  for (auto& [m, c] : out.terms_) c = -c;
  return out;
}

double Polynomial::evaluate(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != dimension_) throw DimensionMismatch("Polynomial::evaluate: point size");
  double sum = 0.0;
  for (const auto& [m, c] : terms_) {
    double t = c;
    for (int i = 0; i < dimension_; ++i) {
      for (int e = 0; e < m[i]; ++e) t *= point[static_cast<std::size_t>(i)];
    }
    sum += t;
  }
  return sum;
}

namespace {

std::string format_coefficient(double c) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", c);
  return buf;
}

}  // namespace

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : terms_) {
    double mag = c;
    if (!first) {
      out += c < 0 ? " - " : " + ";
      mag = std::abs(c);
    }
    std::string coeff = format_coefficient(mag);
    if (m.degree() == 0) {
      out += coeff;
    } else {
      out += coeff + "*" + m.to_string();
    }
    first = false;
  }
  return out;
}

namespace {

class PolyParser {
 public:
  PolyParser(std::string_view text, int dimension) : text_(text), dimension_(dimension) {}

  Polynomial parse() {
    Polynomial out(dimension_);
    skip_space();
    if (at_end()) throw ParseError("empty polynomial text");
    bool first = true;
    while (!at_end()) {
      double sign = 1.0;
      skip_space();
      if (peek() == '+' || peek() == '-') {
        if (peek() == '-') sign = -1.0;
        ++pos_;
      } else if (!first) {
        fail("expected '+' or '-'");
      }
      skip_space();
      // Unary signs directly after a binary operator ("a - -3*x").
      while (peek() == '+' || peek() == '-') {
        if (peek() == '-') sign = -sign;
        ++pos_;
        skip_space();
      }
      auto [coeff, mono] = parse_term();
      out.add_term(mono, sign * coeff);
      first = false;
      skip_space();
    }
    return out;
  }

 private:
  std::pair<double, Monomial> parse_term() {
    double coeff = 1.0;
    std::vector<int> exps(static_cast<std::size_t>(dimension_), 0);
    bool need_factor = true;
    while (need_factor) {
      skip_space();
      char c = peek();
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        coeff *= parse_number();
      } else if (std::isalpha(static_cast<unsigned char>(c))) {
        int var = parse_variable();
        int e = 1;
        skip_space();
        if (peek() == '^') {
          ++pos_;
          skip_space();
          e = parse_integer();
        }
        exps[static_cast<std::size_t>(var)] += e;
      } else {
        fail("expected number or variable");
      }
      skip_space();
      if (peek() == '*') {
        ++pos_;
      } else {
        need_factor = false;
      }
    }
    return {coeff, Monomial(std::move(exps))};
  }

  double parse_number() {
    std::string buf(text_.substr(pos_, 64));
    char* end = nullptr;
    double v = std::strtod(buf.c_str(), &end);
    auto used = static_cast<std::size_t>(end - buf.c_str());
    if (used == 0) fail("bad number");
    pos_ += used;
    return v;
  }

  int parse_integer() {
    std::size_t start = pos_;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    if (start == pos_) fail("expected integer exponent");
    return std::stoi(std::string(text_.substr(start, pos_ - start)));
  }

  int parse_variable() {
    char c = peek();
    ++pos_;
    int index = -1;
    if (c == 'a') {
      std::size_t start = pos_;
      while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      if (start == pos_) fail("expected variable index after 'a'");
      index = std::stoi(std::string(text_.substr(start, pos_ - start))) - 1;
    } else if (c == 'x') {
      index = 0;
    } else if (c == 'y') {
      index = 1;
    } else if (c == 'z') {
      index = 2;
    } else {
      fail(std::string("unknown variable '") + c + "'");
    }
    if (index < 0 || index >= dimension_) fail("variable index out of range");
    return index;
  }

  void skip_space() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("polynomial parse error at offset " + std::to_string(pos_) + ": " + what);
  }

  std::string_view text_;
  int dimension_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial Polynomial::parse(std::string_view text, int dimension) {
  return PolyParser(text, dimension).parse();
}

Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
Polynomial operator*(Polynomial a, double s) { return a *= s; }
Polynomial operator*(double s, Polynomial a) { return a *= s; }

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.dimension() != b.dimension()) throw DimensionMismatch("Polynomial mul: dimension mismatch");
  Polynomial out(a.dimension());
  for (const auto& [ma, ca] : a.terms()) {
    for (const auto& [mb, cb] : b.terms()) out.add_term(ma * mb, ca * cb);
  }
  return out;
}

Polynomial pow(const Polynomial& p, int exponent) {
  if (exponent < 0) throw std::invalid_argument("pow: negative exponent");
  Polynomial result = Polynomial::constant(p.dimension(), 1.0);
  Polynomial base = p;
  while (exponent > 0) {
    if (exponent & 1) result = result * base;
    exponent >>= 1;
    if (exponent > 0) base = base * base;
  }
  return result;
}

double max_coefficient_difference(const Polynomial& a, const Polynomial& b) {
  return (a - b).max_abs_coefficient();
}

Polynomial derivative(const Polynomial& p, int variable) {
  if (variable < 0 || variable >= p.dimension()) throw DimensionMismatch("derivative: variable out of range");
  Polynomial out(p.dimension());
  for (const auto& [m, c] : p.terms()) {
    int e = m[variable];
    if (e == 0) continue;
    std::vector<int> exps = m.exponents();
    exps[static_cast<std::size_t>(variable)] -= 1;
    out.add_term(Monomial(std::move(exps)), c * e);
  }
  return out;
}

std::vector<Polynomial> grad(const Polynomial& p) {
  std::vector<Polynomial> out;
  out.reserve(static_cast<std::size_t>(p.dimension()));
  for (int i = 0; i < p.dimension(); ++i) out.push_back(derivative(p, i));
  return out;
}

Polynomial lie_derivative(std::span<const Polynomial> field, const Polynomial& V) {
  if (static_cast<int>(field.size()) != V.dimension()) {
    throw DimensionMismatch("lie_derivative: field has " + std::to_string(field.size()) + " components, V has dimension " +
                            std::to_string(V.dimension()));
  }
  Polynomial out(V.dimension());
  for (int i = 0; i < V.dimension(); ++i) {
    const Polynomial& fi = field[static_cast<std::size_t>(i)];
    if (fi.dimension() != V.dimension()) throw DimensionMismatch("lie_derivative: field component dimension");
    Polynomial dV = derivative(V, i);
    if (dV.is_zero() || fi.is_zero()) continue;
    out += fi * dV;
  }
  return out;
}

std::vector<Monomial> monomials_up_to_degree(int dimension, int max_degree, int min_degree) {
  std::vector<Monomial> out;
  if (max_degree < 0) return out;
  std::vector<int> exps(static_cast<std::size_t>(dimension), 0);
  // Enumerate all compositions of each degree, then sort once.
  auto recurse = [&](auto&& self, int var, int remaining) -> void {
    if (var == dimension - 1) {
      exps[static_cast<std::size_t>(var)] = remaining;
      out.emplace_back(exps);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      exps[static_cast<std::size_t>(var)] = e;
      self(self, var + 1, remaining - e);
    }
  };
  for (int d = std::max(0, min_degree); d <= max_degree; ++d) {
    if (dimension == 0) {
      if (d == 0) out.emplace_back(std::vector<int>{});
      continue;
    }
    recurse(recurse, 0, d);
  }
  std::sort(out.begin(), out.end(), GradedLexLess{});
  return out;
}

Polynomial squared_norm(int dimension) {
  Polynomial out(dimension);
  for (int i = 0; i < dimension; ++i) out.add_term(Monomial::variable(dimension, i, 2), 1.0);
  return out;
}

CompiledPolynomial::CompiledPolynomial(const Polynomial& p) : dimension_(p.dimension()) {
  coefficients_.reserve(p.size());
  exponents_.reserve(p.size() * static_cast<std::size_t>(dimension_));
  for (const auto& [m, c] : p.terms()) {
    coefficients_.push_back(c);
    for (int i = 0; i < dimension_; ++i) {
      exponents_.push_back(m[i]);
      max_exponent_ = std::max(max_exponent_, m[i]);
    }
  }
}

namespace {

// Per-thread power table so a shared CompiledPolynomial stays safe to evaluate concurrently.
double* power_table(std::size_t size) {
  thread_local std::vector<double> table;
  if (table.size() < size) table.resize(size);
  return table.data();
}

}  // namespace

double CompiledPolynomial::value(std::span<const double> point) const {
  const int stride = max_exponent_ + 1;
  double* powers_ = power_table(static_cast<std::size_t>(dimension_ * stride));
  for (int i = 0; i < dimension_; ++i) {
    double* row = powers_ + i * stride;
    row[0] = 1.0;
    for (int e = 1; e <= max_exponent_; ++e) row[e] = row[e - 1] * point[static_cast<std::size_t>(i)];
  }
  double sum = 0.0;
  const int* ex = exponents_.data();
  for (std::size_t t = 0; t < coefficients_.size(); ++t, ex += dimension_) {
    double v = coefficients_[t];
    for (int i = 0; i < dimension_; ++i) v *= powers_[static_cast<std::size_t>(i * stride + ex[i])];
    sum += v;
  }
  return sum;
}

double CompiledPolynomial::value_and_gradient(std::span<const double> point, std::span<double> gradient) const {
  const int stride = max_exponent_ + 1;
  double* powers_ = power_table(static_cast<std::size_t>(dimension_ * stride));
  for (int i = 0; i < dimension_; ++i) {
    double* row = powers_ + i * stride;
    row[0] = 1.0;
    for (int e = 1; e <= max_exponent_; ++e) row[e] = row[e - 1] * point[static_cast<std::size_t>(i)];
  }
  std::fill(gradient.begin(), gradient.end(), 0.0);
  double sum = 0.0;
  const int* ex = exponents_.data();
  for (std::size_t t = 0; t < coefficients_.size(); ++t, ex += dimension_) {
    double v = coefficients_[t];
    for (int i = 0; i < dimension_; ++i) v *= powers_[static_cast<std::size_t>(i * stride + ex[i])];
    sum += v;
    for (int j = 0; j < dimension_; ++j) {
      if (ex[j] == 0) continue;
      double g = coefficients_[t] * ex[j];
      for (int i = 0; i < dimension_; ++i) {
        int e = (i == j) ? ex[i] - 1 : ex[i];
        g *= powers_[static_cast<std::size_t>(i * stride + e)];
      }
      gradient[static_cast<std::size_t>(j)] += g;
    }
  }
  return sum;
}

std::vector<PointEvaluation> eval_batch(const Polynomial& p, std::span<const std::vector<double>> points,
                                        bool with_gradient) {
  CompiledPolynomial compiled(p);
  std::vector<PointEvaluation> out;
  out.reserve(points.size());
  std::vector<double> g(static_cast<std::size_t>(p.dimension()));
  for (const auto& x : points) {
    if (static_cast<int>(x.size()) != p.dimension()) throw DimensionMismatch("eval_batch: point dimension");
    for (double v : x) {
      if (!std::isfinite(v)) throw std::domain_error("eval_batch: non-finite coordinate");
    }
    PointEvaluation e;
    if (with_gradient) {
      e.value = compiled.value_and_gradient(x, g);
      e.gradient = g;
    } else {
      e.value = compiled.value(x);
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace sosupo
