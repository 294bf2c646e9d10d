#include "thick/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "thick/errors.hpp"

namespace thick::quad {

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 31>;

struct Estimate {
  double value;
  double error;
  double l1;
};

Estimate rule(const Integrand& f, double a, double b) {
  Estimate e{};
  e.value = GK::integrate(f, a, b, 0, 0.0, &e.error, &e.l1);
  return e;
}

// Bisections per call; a budget that rounding cannot meet stops here instead of at 2^depth.
constexpr int kMaxSplits = 4096;

// Bisection with an absolute budget shared in proportion to interval width.
double adapt(const Integrand& f, double a, double b, const Estimate& whole, double budget, int depth,
             double& worst, int& splits) {
  // Below ~100 ulp of the local L1 mass the estimate measures rounding, not truncation.
  const bool rounding = whole.error <= 100.0 * std::numeric_limits<double>::epsilon() * whole.l1;
  if (whole.error <= budget || depth == 0 || rounding || splits >= kMaxSplits) {
    if (!rounding) worst = std::max(worst, whole.error / budget);
    return whole.value;
  }
  ++splits;
  const double mid = 0.5 * (a + b);
  const Estimate left = rule(f, a, mid), right = rule(f, mid, b);
  return adapt(f, a, mid, left, 0.5 * budget, depth - 1, worst, splits) +
         adapt(f, mid, b, right, 0.5 * budget, depth - 1, worst, splits);
}

}  // namespace

double integrate(const Integrand& f, double a, double b, double abs_tol, double rel_tol) {
  if (a == b) return 0.0;
  const Estimate whole = rule(f, a, b);
  const double budget = std::max(abs_tol, rel_tol * whole.l1);
  double worst = 0.0;
  int splits = 0;
  const double value = adapt(f, a, b, whole, budget, 30, worst, splits);
  // Kronrod error estimates are pessimistic for smooth integrands; only gross failures are errors.
  if (!std::isfinite(value) || worst > 1e4) {
    std::ostringstream msg;
    msg << "quadrature did not converge on [" << a << ", " << b << "]: value " << value
        << ", error/budget ratio " << worst;
    numerical_error(msg.str());
  }
  return value;
}

double integrate_panels(const Integrand& f, double a, double b, double panel, double abs_tol, double rel_tol) {
  if (!(panel > 0.0) || b - a <= panel) return integrate(f, a, b, abs_tol, rel_tol);
  const auto count = static_cast<long>(std::ceil((b - a) / panel));
  // Kahan-compensated sum; long oscillatory ranges produce many cancelling panels.
  double sum = 0.0, carry = 0.0;
  for (long i = 0; i < count; ++i) {
    const double lo = a + static_cast<double>(i) * panel;
    const double hi = (i + 1 == count) ? b : a + static_cast<double>(i + 1) * panel;
    const double y = integrate(f, lo, hi, abs_tol / static_cast<double>(count), rel_tol) - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

GaussLegendre::GaussLegendre(int n) : nodes(n), weights(n) {
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    nodes[i] = -z;
    nodes[n - 1 - i] = z;
    weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace thick::quad
