#include "thick/gmc.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <sstream>

#include "fftw_lock.hpp"
#include "thick/errors.hpp"

namespace thick {

namespace {

void check_field(const MultiscaleField& field, const FieldSampler& sampler) {
  if (field.lattice.N != sampler.lattice().N || field.n_max() != sampler.n_max()) {
    usage_error("field and sampler disagree on the lattice or the scale list");
  }
}

bool selected(const std::vector<char>& region, std::size_t cell) { return region.empty() || region[cell] != 0; }

// Stationary samplers: covariance depends on the torus offset only.
bool stationary(const FieldSampler& sampler) { return dynamic_cast<const SpectralSampler*>(&sampler) != nullptr; }

}  // namespace

double GmcMeasure::total() const { return total({}); }

double GmcMeasure::total(const std::vector<char>& region) const {
  if (!region.empty() && region.size() != masses.size()) usage_error("region mask size does not match the lattice");
  double s = 0.0;
  for (std::size_t c = 0; c < masses.size(); ++c) {
    if (selected(region, c)) s += masses[c];
  }
  return s;
}

GmcMeasure gmc_at_scale(const MultiscaleField& field, const FieldSampler& sampler, int n, double a,
                        double base_density) {
  if (!(a >= 0.0)) domain_error("chaos parameter a must be nonnegative");
  if (n < 0 || n > field.n_max()) usage_error("scale index out of range");
  check_field(field, sampler);
  GmcMeasure m;
  m.lattice = field.lattice;
  m.n = n;
  m.a = a;
  const double cell = field.lattice.h() * field.lattice.h() * base_density;
  const auto x = field.at_scale(n);
  m.masses.resize(x.size());
  const bool uniform = sampler.uniform_variance();
  const double v0 = sampler.variance(n, 0);
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double v = uniform ? v0 : sampler.variance(n, c);
    m.masses[c] = cell * std::exp(a * x[c] - 0.5 * a * a * v);
  }
  return m;
}

double MartingaleTrace::max_relative_gap() const {
  if (!checked) return 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < conditional.size(); ++i) {
    const double prev = i == 0 ? base : total[i - 1];
    worst = std::max(worst, std::abs(conditional[i] - prev) / prev);
  }
  return worst;
}

MartingaleTrace martingale_trace(const MultiscaleField& field, const FieldSampler& sampler, double a,
                                 const std::vector<char>& region) {
  if (!(a >= 0.0)) domain_error("chaos parameter a must be nonnegative");
  check_field(field, sampler);
  const std::size_t cells = field.lattice.size();
  if (!region.empty() && region.size() != cells) usage_error("region mask size does not match the lattice");
  bool any = region.empty();
  for (char r : region) any = any || r != 0;
  if (!any) usage_error("martingale region is empty");

  MartingaleTrace t;
  t.checked = sampler.coupling() == Coupling::IndependentIncrements;
  t.status = t.checked ? "checked"
                       : "skipped: levels share one mode-Gaussian vector, so increments are not independent";
  const double sigma = field.lattice.h() * field.lattice.h();
  std::vector<double> prev(cells, sigma);
  for (std::size_t c = 0; c < cells; ++c) {
    if (selected(region, c)) t.base += sigma;
  }
  const bool uniform = sampler.uniform_variance();
  for (int n = 1; n <= field.n_max(); ++n) {
    const auto m = gmc_at_scale(field, sampler, n, a);
    if (t.checked) {
      // E[exp(a Y_n - a^2/2 (Var X_n - Var X_{n-1}))] with Var Y_n taken from the level-n weights.
      double cond = 0.0;
      double factor = 0.0;
      for (std::size_t c = 0; c < cells; ++c) {
        if (!selected(region, c)) continue;
        if (!uniform || c == 0 || factor == 0.0) {
          const std::size_t q = uniform ? 0 : c;
          const double drift = sampler.variance(n, q) - sampler.variance(n - 1, q);
          factor = std::exp(0.5 * a * a * (sampler.increment_variance(n, q) - drift));
        }
        cond += prev[c] * factor;
      }
      t.conditional.push_back(cond);
    }
    t.total.push_back(m.total(region));
    prev = m.masses;
  }
  return t;
}

double l2_second_moment(const FieldSampler& sampler, int n, double a, const std::vector<char>& region) {
  if (!(a >= 0.0)) domain_error("chaos parameter a must be nonnegative");
  const auto& lat = sampler.lattice();
  const std::size_t cells = lat.size();
  if (!region.empty() && region.size() != cells) usage_error("region mask size does not match the lattice");
  const double sigma = lat.h() * lat.h();
  const double a2 = a * a;
  std::vector<std::size_t> idx;
  for (std::size_t c = 0; c < cells; ++c) {
    if (selected(region, c)) idx.push_back(c);
  }
  double s = 0.0;
  if (stationary(sampler)) {
    const int N = lat.N;
    std::vector<double> w(cells);
    for (std::size_t c = 0; c < cells; ++c) w[c] = std::exp(a2 * sampler.covariance(n, n, 0, c));
    for (std::size_t x : idx) {
      const int xi = static_cast<int>(x % N), xj = static_cast<int>(x / N);
      for (std::size_t y : idx) {
        const int di = (static_cast<int>(y % N) - xi + N) % N, dj = (static_cast<int>(y / N) - xj + N) % N;
        s += w[static_cast<std::size_t>(dj) * N + di];
      }
    }
  } else {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      s += std::exp(a2 * sampler.variance(n, idx[i]));
      for (std::size_t j = i + 1; j < idx.size(); ++j) s += 2.0 * std::exp(a2 * sampler.covariance(n, n, idx[i], idx[j]));
    }
  }
  return s * sigma * sigma;
}

AlphaEnergy alpha_energy(const LatticeSpec& lattice, const std::vector<double>& masses, double alpha, int d) {
  if (!(alpha > 0.0)) domain_error("alpha must be positive");
  if (masses.size() != lattice.size()) usage_error("mass vector size does not match the lattice");
  if (alpha >= d) {
    std::ostringstream msg;
    msg << "alpha = " << alpha << " >= d: the energy diverges under refinement";
    warn(msg.str());
  }
  const int N = lattice.N, P = 2 * N, cols = P / 2 + 1;
  const double h = lattice.h();
  double* real = fftw_alloc_real(static_cast<std::size_t>(P) * P);
  fftw_complex* spec = fftw_alloc_complex(static_cast<std::size_t>(P) * cols);
  fftw_plan fwd, inv;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fwd = fftw_plan_dft_r2c_2d(P, P, real, spec, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_2d(P, P, spec, real, FFTW_ESTIMATE);
  }
  std::fill(real, real + static_cast<std::size_t>(P) * P, 0.0);
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < N; ++i) real[static_cast<std::size_t>(j) * P + i] = masses[static_cast<std::size_t>(j) * N + i];
  }
  fftw_execute(fwd);
  for (std::size_t k = 0; k < static_cast<std::size_t>(P) * cols; ++k) {
    spec[k][0] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    spec[k][1] = 0.0;
  }
  fftw_execute(inv);  // real[d] = P^2 sum_x m(x) m(x + d), offsets wrapped modulo P

  AlphaEnergy e;
  const double norm = 1.0 / (static_cast<double>(P) * P);
  for (int dj = -(N - 1); dj <= N - 1; ++dj) {
    for (int di = -(N - 1); di <= N - 1; ++di) {
      const double corr = norm * real[static_cast<std::size_t>((dj + P) % P) * P + (di + P) % P];
      if (di == 0 && dj == 0) {
        e.diagonal = corr * std::pow(0.5 * h, -alpha);
        e.value += e.diagonal;
      } else {
        e.value += corr * std::pow(h * std::hypot(di, dj), -alpha);
      }
    }
  }
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }
  fftw_free(real);
  fftw_free(spec);
  return e;
}

AlphaEnergy alpha_energy(const GmcMeasure& measure, double alpha) {
  return alpha_energy(measure.lattice, measure.masses, alpha);
}

RootedThickness rooted_thickness(const MultiscaleField& field, const GmcMeasure& measure) {
  if (measure.n < 1 || measure.n > field.n_max()) usage_error("rooted thickness needs a measure at scale n >= 1");
  if (measure.masses.size() != field.lattice.size()) usage_error("measure and field lattices differ");
  const auto x = field.at_scale(measure.n);
  RootedThickness r;
  for (std::size_t c = 0; c < x.size(); ++c) {
    r.mass += measure.masses[c];
    r.weighted += measure.masses[c] * x[c] / measure.n;
  }
  return r;
}

double pooled_rooted_mean(const std::vector<RootedThickness>& replicas) {
  double mass = 0.0, weighted = 0.0;
  for (const auto& r : replicas) {
    mass += r.mass;
    weighted += r.weighted;
  }
  return mass > 0.0 ? weighted / mass : 0.0;
}

}  // namespace thick
