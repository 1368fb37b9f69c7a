// Nine-mode model of sinusoidally forced shear flow (Moehlis, Faisst & Eckhardt 2004), free-slip
// walls at y = +-1, domain Lx x 2 x Lz. Coefficients are generated from the wavenumbers
// alpha = 2 pi / Lx, beta = pi / 2, gamma = 2 pi / Lz.

#include <cmath>
#include <sstream>

#include "sosupo/dynamics.hpp"
#include "sosupo/errors.hpp"

namespace sosupo {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

ModelCoefficients moehlis9_coefficients(double Lx, double Lz) {
  if (!(Lx > 0) || !(Lz > 0)) throw ModelError("moehlis9: domain lengths must be positive");
  ModelCoefficients c;
  c.version = "moehlis9-coefficients/1";
  const double a = 2.0 * kPi / Lx;
  const double b = kPi / 2.0;
  const double g = 2.0 * kPi / Lz;
  c.alpha = a;
  c.beta = b;
  c.gamma = g;

  const double kag = std::sqrt(a * a + g * g);
  const double kbg = std::sqrt(b * b + g * g);
  const double kabg = std::sqrt(a * a + b * b + g * g);
  const double s6 = std::sqrt(6.0);
  const double s32 = std::sqrt(1.5);

  c.lambda_decay = {b * b,
                    4.0 * b * b / 3.0 + g * g,
                    b * b + g * g,
                    (3.0 * a * a + 4.0 * b * b) / 3.0,
                    a * a + b * b,
                    (3.0 * a * a + 4.0 * b * b + 3.0 * g * g) / 3.0,
                    a * a + b * b + g * g,
                    a * a + b * b + g * g,
                    9.0 * b * b};

  auto& N = c.N;
  // a1
  N.push_back({0, 5, 7, -s32 * b * g / kabg});
  N.push_back({0, 1, 2, s32 * b * g / kbg});
  // a2
  N.push_back({1, 3, 5, 5.0 * std::sqrt(2.0) * g * g / (3.0 * std::sqrt(3.0) * kag)});
  N.push_back({1, 4, 6, -g * g / (s6 * kag)});
  N.push_back({1, 4, 7, -a * b * g / (s6 * kag * kabg)});
  N.push_back({1, 0, 2, -s32 * b * g / kbg});
  N.push_back({1, 2, 8, -s32 * b * g / kbg});
  // a3
  N.push_back({2, 3, 6, 2.0 * a * b * g / (s6 * kag * kbg)});
  N.push_back({2, 4, 5, 2.0 * a * b * g / (s6 * kag * kbg)});
  N.push_back({2, 3, 7, (b * b * (3.0 * a * a + g * g) - 3.0 * g * g * (a * a + g * g)) / (s6 * kag * kbg * kabg)});
  // a4
  N.push_back({3, 0, 4, -a / s6});
  N.push_back({3, 1, 5, -10.0 * a * a / (3.0 * s6 * kag)});
  N.push_back({3, 2, 6, -s32 * a * b * g / (kag * kbg)});
  N.push_back({3, 2, 7, -s32 * a * a * b * b / (kag * kbg * kabg)});
  N.push_back({3, 4, 8, -a / s6});
  // a5
  N.push_back({4, 0, 3, a / s6});
  N.push_back({4, 1, 6, a * a / (s6 * kag)});
  N.push_back({4, 1, 7, -a * b * g / (s6 * kag * kabg)});
  N.push_back({4, 3, 8, a / s6});
  N.push_back({4, 2, 5, 2.0 * a * b * g / (s6 * kag * kbg)});
  // a6
  N.push_back({5, 0, 6, a / s6});
  N.push_back({5, 0, 7, s32 * b * g / kabg});
  N.push_back({5, 1, 3, 10.0 * (a * a - g * g) / (3.0 * s6 * kag)});
  N.push_back({5, 2, 4, -2.0 * std::sqrt(2.0 / 3.0) * a * b * g / (kag * kbg)});
  N.push_back({5, 6, 8, a / s6});
  N.push_back({5, 7, 8, s32 * b * g / kabg});
  // a7
  N.push_back({6, 0, 5, -a / s6});
  N.push_back({6, 5, 8, -a / s6});
  N.push_back({6, 1, 4, (g * g - a * a) / (s6 * kag)});
  N.push_back({6, 2, 3, a * b * g / (s6 * kag * kbg)});
  // a8
  N.push_back({7, 1, 4, 2.0 * a * b * g / (s6 * kag * kabg)});
  N.push_back({7, 2, 3, g * g * (3.0 * a * a - b * b + 3.0 * g * g) / (s6 * kag * kbg * kabg)});
  // a9
  N.push_back({8, 1, 2, s32 * b * g / kbg});
  N.push_back({8, 5, 7, -s32 * b * g / kabg});
  return c;
}

double energy_conservation_residual(const ModelCoefficients& c) {
  const int n = static_cast<int>(c.lambda_decay.size());
  Polynomial cubic(n);
  for (const auto& e : c.N) {
    std::vector<int> exps(static_cast<std::size_t>(n), 0);
    ++exps[static_cast<std::size_t>(e.i)];
    ++exps[static_cast<std::size_t>(e.j)];
    ++exps[static_cast<std::size_t>(e.k)];
    cubic.add_term(Monomial(std::move(exps)), e.value);
  }
  return cubic.max_abs_coefficient();
}

void verify_coefficients(const ModelCoefficients& c) {
  const auto& lam = c.lambda_decay;
  if (lam.size() != 9) throw ModelError("moehlis9: expected 9 decay rates");
  for (double l : lam) {
    if (!(l > 0)) throw ModelError("moehlis9: decay rates must be positive");
    if (l < lam.front() || l > lam.back()) throw ModelError("moehlis9: decay rates not bracketed by lambda_1 and lambda_9");
  }
  for (const auto& e : c.N) {
    if (e.i < 0 || e.i > 8 || e.j < 0 || e.j > 8 || e.k < 0 || e.k > 8) throw ModelError("moehlis9: index out of range");
    if (e.i == 0 && e.j == 0 && e.k == 0 && e.value != 0.0) throw ModelError("moehlis9: N_111 must vanish");
  }
  double r = energy_conservation_residual(c);
  if (r > 1e-12) {
    std::ostringstream os;
    os << "moehlis9: quadratic terms do not conserve energy (largest cubic coefficient " << r << ")";
    throw ModelError(os.str());
  }
}

}  // namespace sosupo
