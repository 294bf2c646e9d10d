#include "thick/fields.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "fftw_lock.hpp"
#include "thick/errors.hpp"
#include "thick/quadrature.hpp"

namespace thick {

std::mutex& detail::fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

namespace {

using detail::fftw_planner_mutex;

constexpr double kPi = std::numbers::pi;

std::uint64_t zigzag(int v) {
  return v >= 0 ? 2ULL * static_cast<std::uint64_t>(v) : 2ULL * static_cast<std::uint64_t>(-(v + 1)) + 1ULL;
}

const quad::GaussLegendre& gauss_legendre(int n) {
  static std::mutex m;
  static std::map<int, std::unique_ptr<quad::GaussLegendre>> cache;
  std::lock_guard lock(m);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<quad::GaussLegendre>(n);
  return *slot;
}

void check_scales(const std::vector<double>& scales) {
  if (scales.empty()) usage_error("at least one scale is required");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0.0)) usage_error("scales must be positive");
    if (i > 0 && !(scales[i] < scales[i - 1])) usage_error("scales must be strictly decreasing");
  }
}

double density2(double t, double m) { return 1.0 / (2.0 * kPi * (m * m + t * t)); }

// Integral of density2 over the square [cx +- hw] x [cy +- hw] intersected with lo < |xi| <= hi.
// The y-integral is in closed form; x is integrated adaptively between the kinks.
double annulus_cell_integral(double cx, double cy, double hw, double lo, double hi, double m) {
  const double x0 = cx - hw, x1 = cx + hw, y0 = cy - hw, y1 = cy + hw;
  auto inner = [&](double x) {
    const double a = std::sqrt(m * m + x * x);
    // atan(v / a) - atan(u / a) without the cancellation far from the origin.
    auto prim = [&](double u, double v) { return std::atan2((v - u) * a, a * a + u * v) / (2.0 * kPi * a); };
    const double yh = std::sqrt(std::max(hi * hi - x * x, 0.0));
    const double yl = std::sqrt(std::max(lo * lo - x * x, 0.0));
    double s = 0.0;
    for (auto [p, q] : {std::pair{-yh, -yl}, std::pair{yl, yh}}) {
      const double u = std::max(p, y0), v = std::min(q, y1);
      if (v > u) s += prim(u, v);
    }
    return s;
  };
  std::vector<double> pts{x0, x1};
  for (double R : {lo, hi}) {
    pts.push_back(R);
    pts.push_back(-R);
    for (double y : {y0, y1}) {
      if (R * R > y * y) {
        pts.push_back(std::sqrt(R * R - y * y));
        pts.push_back(-std::sqrt(R * R - y * y));
      }
    }
  }
  std::sort(pts.begin(), pts.end());
  // Slivers next to tangent points carry rounding well above 1e-12 of their own size,
  // so accuracy is set against the magnitude of the whole cell.
  const double scale = 4.0 * hw * hw / (2.0 * kPi * (m * m + cx * cx + cy * cy + 2.0 * hw * hw));
  double s = 0.0, prev = x0;
  for (double p : pts) {
    if (p <= prev || p > x1) continue;
    // x = prev + (p - prev)(3u^2 - 2u^3) absorbs the square-root kinks at tangent points.
    const double w = p - prev, a = prev;
    s += quad::integrate([&](double u) { return inner(a + w * u * u * (3.0 - 2.0 * u)) * 6.0 * w * u * (1.0 - u); },
                         0.0, 1.0, 1e-11 * scale, 1e-12);
    prev = p;
  }
  return s;
}

}  // namespace

void LatticeSpec::validate() const {
  if (N < 8) usage_error("lattice.N must be >= 8");
  if (N % 2 != 0) usage_error("lattice.N must be even");
  if (!(L > 0.0) || !std::isfinite(L)) usage_error("lattice.L must be positive");
}

LatticeSpec LatticeSpec::interior(int N, double margin) {
  LatticeSpec lat;
  lat.N = N;
  lat.L = 1.0 - 2.0 * margin;
  const double h = lat.L / N;
  lat.offset = {margin + 0.5 * h, margin + 0.5 * h};
  return lat;
}

std::vector<double> MultiscaleField::at_scale(int n) const {
  if (n < 0 || n > n_max()) usage_error("scale index out of range");
  std::vector<double> x(lattice.size(), 0.0);
  for (int k = 0; k < n; ++k) {
    const auto& y = increments[k];
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
  }
  return x;
}

std::vector<double> efold_scales(int n_max) {
  std::vector<double> s(std::max(n_max, 0));
  for (int k = 1; k <= n_max; ++k) s[k - 1] = std::exp(-static_cast<double>(k));
  return s;
}

// ---------------------------------------------------------------------------
// Snapshots

namespace {

constexpr char kMagic[4] = {'T', 'H', 'K', 'F'};
constexpr std::uint32_t kSnapshotVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) usage_error("truncated field snapshot");
  return v;
}

}  // namespace

void write_snapshot(const std::string& path, const MultiscaleField& field) {
  std::ofstream os(path, std::ios::binary);
  if (!os) usage_error("cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  put(os, kSnapshotVersion);
  put(os, static_cast<std::uint32_t>(field.lattice.N));
  put(os, field.lattice.L);
  put(os, static_cast<std::uint32_t>(field.n_max()));
  put(os, field.seed);
  put(os, field.replica);
  put(os, field.lattice.offset.x);
  put(os, field.lattice.offset.y);
  for (double s : field.scales) put(os, s);
  std::vector<double> x(field.lattice.size(), 0.0);
  for (int k = 0; k < field.n_max(); ++k) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += field.increments[k][i];
    os.write(reinterpret_cast<const char*>(x.data()), static_cast<std::streamsize>(x.size() * sizeof(double)));
  }
  if (!os) usage_error("failed writing '" + path + "'");
}

MultiscaleField read_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) usage_error("cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) usage_error("'" + path + "' is not a field snapshot");
  if (get<std::uint32_t>(is) != kSnapshotVersion) usage_error("unsupported snapshot version");
  MultiscaleField f;
  f.lattice.N = static_cast<int>(get<std::uint32_t>(is));
  f.lattice.L = get<double>(is);
  const auto n = get<std::uint32_t>(is);
  f.seed = get<std::uint64_t>(is);
  f.replica = get<std::uint64_t>(is);
  f.lattice.offset.x = get<double>(is);
  f.lattice.offset.y = get<double>(is);
  f.scales.resize(n);
  for (auto& s : f.scales) s = get<double>(is);
  std::vector<double> prev(f.lattice.size(), 0.0), x(f.lattice.size());
  for (std::uint32_t k = 0; k < n; ++k) {
    is.read(reinterpret_cast<char*>(x.data()), static_cast<std::streamsize>(x.size() * sizeof(double)));
    if (!is) usage_error("truncated field snapshot");
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - prev[i];
    f.increments.push_back(std::move(y));
    prev = x;
  }
  return f;
}

void write_field_csv(const std::string& path, const MultiscaleField& field) {
  std::ofstream os(path);
  if (!os) usage_error("cannot open '" + path + "' for writing");
  os << "i,j,x,y";
  for (int n = 1; n <= field.n_max(); ++n) os << ",X_" << n;
  os << '\n' << std::setprecision(17);
  std::vector<std::vector<double>> levels;
  for (int n = 1; n <= field.n_max(); ++n) levels.push_back(field.at_scale(n));
  const int N = field.lattice.N;
  for (std::size_t c = 0; c < field.lattice.size(); ++c) {
    const Point p = field.lattice.point(c);
    os << c % N << ',' << c / N << ',' << p.x << ',' << p.y;
    for (const auto& l : levels) os << ',' << l[c];
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// FieldSampler

FieldSampler::FieldSampler(LatticeSpec lattice, std::vector<double> scales)
    : lattice_(lattice), scales_(std::move(scales)) {
  lattice_.validate();
  check_scales(scales_);
}

double FieldSampler::variance(int n, std::size_t cell) const { return covariance(n, n, cell, cell); }

double FieldSampler::difference_variance(int j, int k, std::size_t cell) const {
  return variance(j, cell) + variance(k, cell) - 2.0 * covariance(j, k, cell, cell);
}

double FieldSampler::increment_variance(int k, std::size_t cell) const {
  if (k < 1 || k > n_max()) usage_error("scale index out of range");
  if (coupling() == Coupling::IndependentIncrements) return variance(k, cell) - variance(k - 1, cell);
  return difference_variance(k, k - 1, cell);
}

// ---------------------------------------------------------------------------
// SpectralLattice

struct SpectralLattice::Plan {
  fftw_plan plan = nullptr;
};

SpectralLattice::SpectralLattice(const LatticeSpec& lattice)
    : lattice_(lattice), dxi_(2.0 * kPi / lattice.L), plan_(std::make_unique<Plan>()) {
  lattice_.validate();
  const int N = lattice_.N, half = N / 2, cols = N / 2 + 1;
  for (int row = 0; row < N; ++row) {
    const int ky = row <= half ? row : row - N;
    for (int col = 0; col < cols; ++col) {
      const int kx = col;
      Mode mode;
      mode.kx = kx;
      mode.ky = ky;
      mode.slot = static_cast<std::size_t>(row) * cols + col;
      const bool edge_col = (col == 0 || col == half);
      if (edge_col) {
        if (ky == 0 || ky == half) {
          mode.self_conjugate = true;
        } else if (ky > 0) {
          mode.partner = static_cast<std::size_t>(N - row) * cols + col;
        } else {
          continue;  // stored partner of a canonical mode
        }
      }
      mode.key = (zigzag(kx) << 32) | zigzag(ky);
      modes_.push_back(mode);
    }
  }
  std::lock_guard lock(fftw_planner_mutex());
  auto* in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * N * cols));
  auto* out = static_cast<double*>(fftw_malloc(sizeof(double) * N * N));
  plan_->plan = fftw_plan_dft_c2r_2d(N, N, in, out, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  if (plan_->plan == nullptr) numerical_error("FFTW failed to create a plan");
}

SpectralLattice::~SpectralLattice() {
  if (plan_ && plan_->plan) {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_->plan);
  }
}

double SpectralLattice::radius(const Mode& mode) const { return dxi_ * std::hypot(mode.kx, mode.ky); }

double SpectralLattice::cell_integral(const Mode& mode, const std::function<double(double)>& f,
                                      const std::vector<double>& radii, int nodes) const {
  const double cx = dxi_ * mode.kx, cy = dxi_ * mode.ky, hw = 0.5 * dxi_;
  const double x0 = cx - hw, x1 = cx + hw, y0 = cy - hw, y1 = cy + hw;
  const double nx = std::max({x0, 0.0, -x1}), ny = std::max({y0, 0.0, -y1});
  const double rmin = std::hypot(nx, ny);
  const double rmax = std::hypot(std::max(std::abs(x0), std::abs(x1)), std::max(std::abs(y0), std::abs(y1)));
  bool cut = false;
  for (double R : radii) cut = cut || (R > rmin && R < rmax);
  const bool near_origin = std::hypot(cx, cy) < 3.0 * dxi_;

  if (!cut && !near_origin) {
    const auto& gl = gauss_legendre(nodes);
    double s = 0.0;
    for (int i = 0; i < gl.size(); ++i) {
      const double x = cx + hw * gl.nodes[i];
      double row = 0.0;
      for (int j = 0; j < gl.size(); ++j) row += gl.weights[j] * f(std::hypot(x, cy + hw * gl.nodes[j]));
      s += gl.weights[i] * row;
    }
    return s * hw * hw;
  }

  // Absolute accuracy relative to the size of f over the cell; see annulus_cell_integral.
  const double fscale = std::max({std::abs(f(rmin)), std::abs(f(std::hypot(cx, cy))), std::abs(f(rmax))});
  const double tol = std::max(1e-11 * fscale * hw * hw, 1e-300);
  auto breaks = [](double lo, double hi, std::vector<double> pts) {
    pts.push_back(lo);
    pts.push_back(hi);
    std::sort(pts.begin(), pts.end());
    std::vector<double> out;
    for (double p : pts) {
      if (p < lo || p > hi) continue;
      if (out.empty() || p - out.back() > 1e-14 * (hi - lo)) out.push_back(p);
    }
    return out;
  };
  auto inner = [&](double x) {
    std::vector<double> pts{0.0};
    for (double R : radii) {
      if (R > std::abs(x)) {
        const double y = std::sqrt(R * R - x * x);
        pts.push_back(y);
        pts.push_back(-y);
      }
    }
    const auto b = breaks(y0, y1, pts);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < b.size(); ++i) {
      s += quad::integrate([&](double y) { return f(std::hypot(x, y)); }, b[i], b[i + 1], tol / hw, 1e-11);
    }
    return s;
  };
  std::vector<double> pts{0.0};
  for (double R : radii) {
    pts.push_back(R);
    pts.push_back(-R);
    for (double y : {y0, y1}) {
      if (R > std::abs(y)) {
        pts.push_back(std::sqrt(R * R - y * y));
        pts.push_back(-std::sqrt(R * R - y * y));
      }
    }
  }
  const auto b = breaks(x0, x1, pts);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < b.size(); ++i) {
    // Square-root kinks sit at the breakpoints; x = a + w (3u^2 - 2u^3) smooths them.
    const double a = b[i], w = b[i + 1] - b[i];
    s += quad::integrate([&](double u) { return inner(a + w * u * u * (3.0 - 2.0 * u)) * 6.0 * w * u * (1.0 - u); },
                         0.0, 1.0, tol, 1e-10);
  }
  return s;
}

std::vector<double> SpectralLattice::transform(std::vector<double>& half_complex) const {
  const int N = lattice_.N, cols = N / 2 + 1;
  auto* in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * N * cols));
  auto* out = static_cast<double*>(fftw_malloc(sizeof(double) * N * N));
  std::memcpy(in, half_complex.data(), sizeof(fftw_complex) * N * cols);
  fftw_execute_dft_c2r(plan_->plan, in, out);
  std::vector<double> field(out, out + static_cast<std::size_t>(N) * N);
  fftw_free(in);
  fftw_free(out);
  return field;
}

namespace {

void deposit(std::vector<double>& buf, const SpectralLattice::Mode& mode, double amp, double a, double b) {
  if (mode.self_conjugate) {
    buf[2 * mode.slot] += amp * a;
    return;
  }
  // c = amp (A - iB) / 2 at xi and its conjugate at -xi, so that 2 Re(c e^{i xi.x}) = amp (A cos + B sin).
  const double re = 0.5 * amp * a, im = -0.5 * amp * b;
  buf[2 * mode.slot] += re;
  buf[2 * mode.slot + 1] += im;
  if (mode.partner != SpectralLattice::npos) {
    buf[2 * mode.partner] += re;
    buf[2 * mode.partner + 1] -= im;
  }
}

}  // namespace

std::vector<double> SpectralLattice::synthesize(const std::vector<double>& amp, const NormalStream& stream) const {
  if (amp.size() != modes_.size()) usage_error("amplitude vector does not match the mode list");
  const int N = lattice_.N, cols = N / 2 + 1;
  std::vector<double> buf(2 * static_cast<std::size_t>(N) * cols, 0.0);
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    if (amp[i] == 0.0) continue;
    const auto [a, b] = stream.pair(modes_[i].key);
    deposit(buf, modes_[i], amp[i], a, b);
  }
  return transform(buf);
}

std::vector<std::vector<double>> SpectralLattice::synthesize_shared(const std::vector<std::vector<double>>& amps,
                                                                   const NormalStream& stream) const {
  std::vector<double> ga(modes_.size()), gb(modes_.size());
  for (std::size_t i = 0; i < modes_.size(); ++i) std::tie(ga[i], gb[i]) = stream.pair(modes_[i].key);
  const int N = lattice_.N, cols = N / 2 + 1;
  std::vector<std::vector<double>> out;
  for (const auto& amp : amps) {
    if (amp.size() != modes_.size()) usage_error("amplitude vector does not match the mode list");
    std::vector<double> buf(2 * static_cast<std::size_t>(N) * cols, 0.0);
    for (std::size_t i = 0; i < modes_.size(); ++i) {
      if (amp[i] != 0.0) deposit(buf, modes_[i], amp[i], ga[i], gb[i]);
    }
    out.push_back(transform(buf));
  }
  return out;
}

double SpectralLattice::covariance(const std::vector<double>& amp_a, const std::vector<double>& amp_b,
                                   std::size_t a, std::size_t b) const {
  const int N = lattice_.N;
  const long dx = static_cast<long>(a % N) - static_cast<long>(b % N);
  const long dy = static_cast<long>(a / N) - static_cast<long>(b / N);
  double s = 0.0;
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    const double w = amp_a[i] * amp_b[i];
    if (w == 0.0) continue;
    const long phase = (modes_[i].kx * dx + modes_[i].ky * dy) % N;
    s += w * std::cos(2.0 * kPi * static_cast<double>(phase) / N);
  }
  return s;
}

// ---------------------------------------------------------------------------
// SpectralSampler

int SpectralSampler::max_resolved_level(const LatticeSpec& lattice) {
  return static_cast<int>(std::floor(std::log(kPi * (lattice.N - 1) / lattice.L)));
}

int SpectralSampler::required_N(double eps, double L) {
  int N = static_cast<int>(std::ceil(L / (eps * kPi) + 1.0));
  return N + (N % 2);
}

SpectralSampler::SpectralSampler(const CutoffSpec& spec, const LatticeSpec& lattice, std::vector<double> scales,
                                 SpectralOptions options)
    : FieldSampler(lattice, std::move(scales)), spec_(spec) {
  spec_.validate();
  if (spec_.family != Family::WhiteNoise && spec_.family != Family::Mollified) {
    usage_error("the spectral sampler handles the white-noise and mollified families");
  }
  if (spec_.d != 2) usage_error("samplers are planar: cutoff.d must be 2");
  if (!std::holds_alternative<TorusDomain>(spec_.domain)) usage_error("the spectral sampler needs a torus domain");
  grid_ = std::make_unique<SpectralLattice>(lattice_);
  if (spec_.family == Family::WhiteNoise) {
    const double eps_min = scales_.back();
    if (1.0 / eps_min > kPi * (lattice_.N - 1) / lattice_.L) {
      std::ostringstream msg;
      msg << "scale exceeds lattice resolution: |xi| <= " << 1.0 / eps_min << " needs N >= "
          << required_N(eps_min, lattice_.L) << " at L = " << lattice_.L << " (have N = " << lattice_.N << ")";
      feasibility_error(msg.str());
    }
  }
  const auto& modes = grid_->modes();
  const double m = spec_.m;
  level_variance_.assign(n_max() + 1, 0.0);
  amp_.assign(n_max(), std::vector<double>(modes.size(), 0.0));

  if (spec_.family == Family::WhiteNoise) {
    for (int k = 1; k <= n_max(); ++k) {
      const double lo = k == 1 ? 0.0 : 1.0 / scales_[k - 2], hi = 1.0 / scales_[k - 1];
      double total = 0.0;
      for (std::size_t i = 0; i < modes.size(); ++i) {
        const double r = grid_->radius(modes[i]);
        const double reach = 0.7072 * grid_->dxi();
        if (r - reach > hi || r + reach < lo) continue;
        const double w = SpectralLattice::multiplicity(modes[i]) *
                         annulus_cell_integral(grid_->dxi() * modes[i].kx, grid_->dxi() * modes[i].ky,
                                               0.5 * grid_->dxi(), lo, hi, m);
        amp_[k - 1][i] = std::sqrt(w);
        total += w;
      }
      level_variance_[k] = level_variance_[k - 1] + total;
    }
    return;
  }

  const Mollifier moll = *spec_.mollifier;
  for (int k = 1; k <= n_max(); ++k) {
    const double eps = scales_[k - 1];
    auto f = [&](double t) {
      const double th = moll.fourier(eps * t, 2);
      return th * th * density2(t, m);
    };
    const int nodes = std::clamp(4 + static_cast<int>(std::ceil(2.0 * moll.width * eps * grid_->dxi())), 4, 24);
    double total = 0.0;
    for (std::size_t i = 0; i < modes.size(); ++i) {
      const double w = SpectralLattice::multiplicity(modes[i]) * grid_->cell_integral(modes[i], f, {}, nodes);
      const double sign = moll.fourier(eps * grid_->radius(modes[i]), 2) < 0.0 ? -1.0 : 1.0;
      amp_[k - 1][i] = sign * std::sqrt(w);
      total += w;
    }
    level_variance_[k] = total;
    const double target = kernel_K(0.0, eps, spec_);
    const double tail = 1.0 - total / target;
    if (tail > options.max_tail_fraction) {
      int N = lattice_.N;
      auto weight = [&](double t) {
        const double th = moll.fourier(eps * t, 2);
        return th * th;
      };
      while (1.0 - spectral_shell(0.0, 0.0, kPi * N / lattice_.L, 2, m, weight, moll.width * eps) / target >
             0.5 * options.max_tail_fraction) {
        N *= 2;
      }
      std::ostringstream msg;
      msg << "scale exceeds lattice resolution: " << 100.0 * tail << "% of Var X at eps = " << eps
          << " lies beyond the lattice frequencies; suggested N >= " << N << " at L = " << lattice_.L;
      feasibility_error(msg.str());
    }
  }
}

Coupling SpectralSampler::coupling() const {
  return spec_.family == Family::Mollified ? Coupling::SharedModes : Coupling::IndependentIncrements;
}

MultiscaleField SpectralSampler::sample(std::uint64_t seed, std::uint64_t replica) const {
  MultiscaleField f;
  f.lattice = lattice_;
  f.scales = scales_;
  f.seed = seed;
  f.replica = replica;
  f.coupling = coupling();
  if (coupling() == Coupling::IndependentIncrements) {
    for (int k = 1; k <= n_max(); ++k) {
      f.increments.push_back(grid_->synthesize(amp_[k - 1], NormalStream(seed, replica, static_cast<std::uint32_t>(k))));
    }
    return f;
  }
  auto levels = grid_->synthesize_shared(amp_, NormalStream(seed, replica, 0));
  for (int k = n_max() - 1; k >= 1; --k) {
    for (std::size_t i = 0; i < levels[k].size(); ++i) levels[k][i] -= levels[k - 1][i];
  }
  f.increments = std::move(levels);
  return f;
}

double SpectralSampler::covariance(int j, int k, std::size_t a, std::size_t b) const {
  if (j < 0 || k < 0 || j > n_max() || k > n_max()) usage_error("scale index out of range");
  if (j == 0 || k == 0) return 0.0;
  if (coupling() == Coupling::SharedModes) return grid_->covariance(amp_[j - 1], amp_[k - 1], a, b);
  double s = 0.0;
  for (int l = 1; l <= std::min(j, k); ++l) s += grid_->covariance(amp_[l - 1], amp_[l - 1], a, b);
  return s;
}

double SpectralSampler::variance(int n, std::size_t) const {
  if (n < 0 || n > n_max()) usage_error("scale index out of range");
  return level_variance_[n];
}

double SpectralSampler::increment_variance(int k, std::size_t cell) const {
  if (coupling() == Coupling::SharedModes) return FieldSampler::increment_variance(k, cell);
  if (k < 1 || k > n_max()) usage_error("scale index out of range");
  double s = 0.0;
  for (double a : amp_[k - 1]) s += a * a;
  return s;
}

double SpectralSampler::variance_bias(int n) const {
  return level_variance_.at(n) / varG(scales_.at(n - 1), spec_) - 1.0;
}

// ---------------------------------------------------------------------------
// GffSineSampler

namespace {

double lambda(int j, int l) { return kPi * kPi * (static_cast<double>(j) * j + static_cast<double>(l) * l) / 2.0; }

}  // namespace

double GffSineSampler::tail_bound(double eps, int M) {
  // 8 pi sum over modes outside [1, M]^2 of e^{-lambda eps} / lambda (phi^2 <= 4).
  const double c = kPi * kPi * eps / 2.0;
  int J = M + 1;
  while (std::exp(-c * static_cast<double>(J) * J) > 1e-18) ++J;
  double s = 0.0;
  for (int j = 1; j <= J; ++j) {
    for (int l = 1; l <= J; ++l) {
      if (j <= M && l <= M) continue;
      s += std::exp(-lambda(j, l) * eps) / lambda(j, l);
    }
  }
  return 8.0 * kPi * s;
}

int GffSineSampler::required_modes(double eps, double fraction) {
  const double budget = fraction * std::max(-std::log(eps), 1.0);
  int M = 4;
  while (tail_bound(eps, M) > budget) M += std::max(1, M / 8);
  return M;
}

GffSineSampler::GffSineSampler(const LatticeSpec& lattice, std::vector<double> scales, int modes, double margin)
    : FieldSampler(lattice, std::move(scales)) {
  const double eps_min = scales_.back();
  if (modes <= 0) {
    M_ = required_modes(eps_min);
  } else {
    M_ = modes;
    const double bound = tail_bound(eps_min, M_);
    if (bound > 0.01 * std::max(-std::log(eps_min), 1.0)) {
      std::ostringstream msg;
      msg << "mode budget too small: tail variance bound " << bound << " exceeds 1% of -log eps at eps = " << eps_min
          << "; required M >= " << required_modes(eps_min);
      feasibility_error(msg.str());
    }
  }
  const int N = lattice_.N;
  bool outside = false;
  sx_.resize(N, M_);
  sy_.resize(N, M_);
  for (int i = 0; i < N; ++i) {
    const Point p = lattice_.point(static_cast<std::size_t>(i) * (N + 1));
    outside = outside || p.x <= margin || p.x >= 1.0 - margin || p.y <= margin || p.y >= 1.0 - margin;
    for (int j = 1; j <= M_; ++j) {
      sx_(i, j - 1) = std::sin(kPi * j * p.x);
      sy_(i, j - 1) = std::sin(kPi * j * p.y);
    }
  }
  if (outside) {
    std::ostringstream msg;
    msg << "lattice extends outside D^(" << margin << ")";
    warn(msg.str());
  }
  for (int k = 1; k <= n_max(); ++k) {
    const Eigen::MatrixXd hi = level_weight2(k), lo = level_weight2(k - 1);
    weights_.push_back((hi - lo).cwiseMax(0.0).cwiseSqrt());
  }
  const Eigen::MatrixXd sx2 = sx_.cwiseAbs2(), sy2 = sy_.cwiseAbs2();
  variance_.assign(n_max() + 1, std::vector<double>(lattice_.size(), 0.0));
  for (int n = 1; n <= n_max(); ++n) {
    const Eigen::MatrixXd v = 4.0 * sx2 * level_weight2(n) * sy2.transpose();
    std::copy(v.data(), v.data() + v.size(), variance_[n].begin());
  }
}

Eigen::MatrixXd GffSineSampler::level_weight2(int n) const {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(M_, M_);
  if (n == 0) return w;
  const double eps = scales_[n - 1];
  for (int j = 1; j <= M_; ++j) {
    for (int l = 1; l <= M_; ++l) w(j - 1, l - 1) = 2.0 * kPi * std::exp(-lambda(j, l) * eps) / lambda(j, l);
  }
  return w;
}

MultiscaleField GffSineSampler::sample(std::uint64_t seed, std::uint64_t replica) const {
  MultiscaleField f;
  f.lattice = lattice_;
  f.scales = scales_;
  f.seed = seed;
  f.replica = replica;
  for (int k = 1; k <= n_max(); ++k) {
    const NormalStream stream(seed, replica, static_cast<std::uint32_t>(k));
    Eigen::MatrixXd c(M_, M_);
    for (int j = 0; j < M_; ++j) {
      for (int l = 0; l < M_; ++l) {
        c(j, l) = weights_[k - 1](j, l) * stream.at((static_cast<std::uint64_t>(j) << 32) | static_cast<std::uint64_t>(l));
      }
    }
    const Eigen::MatrixXd y = 2.0 * sx_ * c * sy_.transpose();  // phi_jl = 2 sin(pi j x) sin(pi l y)
    f.increments.emplace_back(y.data(), y.data() + y.size());
  }
  return f;
}

double GffSineSampler::covariance(int j, int k, std::size_t a, std::size_t b) const {
  const int n = std::min(j, k);
  if (n < 0 || std::max(j, k) > n_max()) usage_error("scale index out of range");
  if (n == 0) return 0.0;
  const int N = lattice_.N;
  const auto ax = static_cast<Eigen::Index>(a % N), ay = static_cast<Eigen::Index>(a / N);
  const auto bx = static_cast<Eigen::Index>(b % N), by = static_cast<Eigen::Index>(b / N);
  const Eigen::VectorXd u = sx_.row(ax).transpose().cwiseProduct(sx_.row(bx).transpose());
  const Eigen::VectorXd v = sy_.row(ay).transpose().cwiseProduct(sy_.row(by).transpose());
  return 4.0 * u.dot(level_weight2(n) * v);
}

double GffSineSampler::variance(int n, std::size_t cell) const {
  if (n < 0 || n > n_max()) usage_error("scale index out of range");
  return variance_[n][cell];
}

double GffSineSampler::increment_variance(int k, std::size_t cell) const {
  if (k < 1 || k > n_max()) usage_error("scale index out of range");
  const int N = lattice_.N;
  const Eigen::VectorXd u = sx_.row(static_cast<Eigen::Index>(cell % N)).transpose().array().square();
  const Eigen::VectorXd v = sy_.row(static_cast<Eigen::Index>(cell / N)).transpose().array().square();
  return 4.0 * u.dot(weights_[k - 1].cwiseAbs2() * v);
}

// ---------------------------------------------------------------------------
// Dense samplers

PsdFactor PsdFactor::compute(const Eigen::MatrixXd& gram, double rel_tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success) numerical_error("eigen-decomposition of the Gram matrix failed");
  PsdFactor f;
  const Eigen::VectorXd& ev = es.eigenvalues();
  f.min_eigenvalue = ev.minCoeff();
  f.max_eigenvalue = ev.maxCoeff();
  if (f.min_eigenvalue < -rel_tol * std::max(f.max_eigenvalue, 0.0)) {
    std::ostringstream msg;
    msg << "kernel not PSD at tolerance: min eigenvalue " << f.min_eigenvalue << " < -" << rel_tol << " * "
        << f.max_eigenvalue;
    numerical_error(msg.str());
  }
  Eigen::VectorXd root_ev(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < 0.0) f.clipped += -ev[i];
    root_ev[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  f.root = es.eigenvectors() * root_ev.asDiagonal() * es.eigenvectors().transpose();
  return f;
}

IntegralFamilySampler::IntegralFamilySampler(const CutoffSpec& spec, const LatticeSpec& lattice,
                                             std::vector<double> scales)
    : FieldSampler(lattice, scales), dec_(spec, scales) {
  if (spec.family != Family::MassiveIntegral) usage_error("the dense sampler handles the massive-integral family");
  if (lattice_.size() > 4096) {
    feasibility_error("dense covariance factorization needs N^2 <= 4096 points (have " +
                      std::to_string(lattice_.size()) + ")");
  }
  const int N = lattice_.N;
  const auto n = static_cast<Eigen::Index>(lattice_.size());
  const double h = lattice_.h();
  for (int k = 1; k <= n_max(); ++k) {
    // p_k depends on the lattice offset (di, dj) only.
    Eigen::MatrixXd table(N, N);
    for (int di = 0; di < N; ++di) {
      for (int dj = 0; dj < N; ++dj) table(di, dj) = dec_.p(k, {0.0, 0.0}, {di * h, dj * h});
    }
    Eigen::MatrixXd gram(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) gram(a, b) = table(std::abs(a % N - b % N), std::abs(a / N - b / N));
    }
    auto factor = PsdFactor::compute(gram);
    clipped_.push_back(factor.clipped);
    factors_.push_back(std::move(factor.root));
  }
}

MultiscaleField IntegralFamilySampler::sample(std::uint64_t seed, std::uint64_t replica) const {
  MultiscaleField f;
  f.lattice = lattice_;
  f.scales = scales_;
  f.seed = seed;
  f.replica = replica;
  const auto n = static_cast<Eigen::Index>(lattice_.size());
  for (int k = 1; k <= n_max(); ++k) {
    const NormalStream stream(seed, replica, static_cast<std::uint32_t>(k));
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = stream.at(static_cast<std::uint64_t>(i));
    const Eigen::VectorXd y = factors_[k - 1] * z;
    f.increments.emplace_back(y.data(), y.data() + y.size());
  }
  return f;
}

double IntegralFamilySampler::covariance(int j, int k, std::size_t a, std::size_t b) const {
  const int n = std::min(j, k);
  if (n < 0 || std::max(j, k) > n_max()) usage_error("scale index out of range");
  double s = 0.0;
  for (int l = 0; l < n; ++l) {
    s += factors_[l].row(static_cast<Eigen::Index>(a)).dot(factors_[l].row(static_cast<Eigen::Index>(b)));
  }
  return s;
}

double IntegralFamilySampler::increment_variance(int k, std::size_t cell) const {
  if (k < 1 || k > n_max()) usage_error("scale index out of range");
  return factors_[k - 1].row(static_cast<Eigen::Index>(cell)).squaredNorm();
}

std::unique_ptr<FieldSampler> make_sampler(const CutoffSpec& spec, const LatticeSpec& lattice,
                                           const std::vector<double>& scales) {
  switch (spec.family) {
    case Family::WhiteNoise:
    case Family::Mollified: return std::make_unique<SpectralSampler>(spec, lattice, scales);
    case Family::MassiveIntegral: return std::make_unique<IntegralFamilySampler>(spec, lattice, scales);
    case Family::GffSemigroup: {
      const auto& sq = std::get<UnitSquareDomain>(spec.domain);
      return std::make_unique<GffSineSampler>(lattice, scales, 0, sq.margin);
    }
  }
  usage_error("unknown family");
}

std::vector<double> sample_exact(const std::function<double(Point, Point)>& kernel, const std::vector<Point>& points,
                                 std::uint64_t seed, std::uint64_t replica) {
  if (points.size() > 2048) feasibility_error("exact sampling is limited to 2048 points");
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) gram(a, b) = gram(b, a) = kernel(points[a], points[b]);
  }
  const auto factor = PsdFactor::compute(gram);
  const NormalStream stream(seed, replica, 0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = stream.at(static_cast<std::uint64_t>(i));
  const Eigen::VectorXd x = factor.root * z;
  return {x.data(), x.data() + x.size()};
}

}  // namespace thick
