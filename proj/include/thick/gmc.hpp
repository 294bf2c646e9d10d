#pragma once

// Chaos measures exp(a X_n - a^2/2 Var X_n) dx on a sampled lattice and Kahane's martingale.

#include <string>
#include <vector>

#include "thick/fields.hpp"

namespace thick {

/// Cell masses of the chaos measure at scale n. The base measure is Lebesgue measure
/// (times base_density) on the lattice cells, so the expected total is the domain area.
struct GmcMeasure {
  LatticeSpec lattice;
  int n = 0;
  double a = 0.0;
  std::vector<double> masses;

  double total() const;
  /// Mass of the cells with region[cell] != 0 (an empty mask selects every cell).
  double total(const std::vector<char>& region) const;
};

/// Uses the sampler's exact per-cell variance, so E[mass] equals the base mass exactly.
GmcMeasure gmc_at_scale(const MultiscaleField& field, const FieldSampler& sampler, int n, double a,
                        double base_density = 1.0);

struct MartingaleTrace {
  double base = 0.0;                // sigma(A)
  std::vector<double> total;        // Q_n sigma(A), n = 1..n_max
  std::vector<double> conditional;  // E[Q_n sigma(A) | levels < n] from the increment weights
  bool checked = false;             // false for families whose increments are not independent
  std::string status;

  /// Largest relative gap between conditional[n] and Q_{n-1} sigma(A) (0 when unchecked).
  double max_relative_gap() const;
};

MartingaleTrace martingale_trace(const MultiscaleField& field, const FieldSampler& sampler, double a,
                                 const std::vector<char>& region = {});

/// Exact second moment E[(Q_n sigma(A))^2] = sum_{x,y} exp(a^2 q_n(x, y)) sigma(x) sigma(y).
double l2_second_moment(const FieldSampler& sampler, int n, double a, const std::vector<char>& region = {});

struct AlphaEnergy {
  double value = 0.0;     // full estimate, diagonal included
  double diagonal = 0.0;  // part carried by the regularised same-cell pairs
};

/// I_alpha = sum_{x,y} |x - y|^{-alpha} nu(x) nu(y) with same-cell distances set to h/2.
/// Computed through a zero-padded FFT autocorrelation of the masses.
AlphaEnergy alpha_energy(const LatticeSpec& lattice, const std::vector<double>& masses, double alpha, int d = 2);
AlphaEnergy alpha_energy(const GmcMeasure& measure, double alpha);

/// GMC-weighted statistics of X_n(x) / n at the measure's scale for one replica.
struct RootedThickness {
  double mass = 0.0;      // total GMC mass
  double weighted = 0.0;  // sum_x mass(x) X_n(x) / n
  double mean() const { return mass > 0.0 ? weighted / mass : 0.0; }
};

RootedThickness rooted_thickness(const MultiscaleField& field, const GmcMeasure& measure);

/// Pooled weighted mean over replicas: sum weighted / sum mass.
double pooled_rooted_mean(const std::vector<RootedThickness>& replicas);

}  // namespace thick
