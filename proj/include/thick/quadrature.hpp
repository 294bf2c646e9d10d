#pragma once

#include <functional>
#include <vector>

namespace thick::quad {

using Integrand = std::function<double(double)>;

/// Adaptive Gauss-Kronrod (G15/K31) on a finite interval. Throws a numerical
/// error if the estimated error exceeds `abs_tol + rel_tol * |I|`.
double integrate(const Integrand& f, double a, double b, double abs_tol = 1e-11, double rel_tol = 1e-11);

/// Splits [a, b] into panels no wider than `panel` and integrates each
/// adaptively. Used for oscillatory integrands where `panel` is a half period.
double integrate_panels(const Integrand& f, double a, double b, double panel, double abs_tol = 1e-11,
                        double rel_tol = 1e-11);

/// n-point Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
  explicit GaussLegendre(int n);
  int size() const { return static_cast<int>(nodes.size()); }
  std::vector<double> nodes;
  std::vector<double> weights;
};

}  // namespace thick::quad
