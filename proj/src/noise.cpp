#include "geowave/noise.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include <fftw3.h>

#include "geowave/errors.hpp"

namespace geowave::noise {

void SpectralMeasure::validate() const {
  if (atoms.empty()) throw Error(ErrorCode::EmptyMeasure, "spectral measure has no atoms");
  for (const Atom& a : atoms)
    if (!(a.frequency >= 0.0) || !(a.weight >= 0.0) || !std::isfinite(a.frequency) ||
        !std::isfinite(a.weight))
      throw Error(ErrorCode::InvalidArgument, "atoms need finite frequency >= 0 and weight >= 0");
}

double SpectralMeasure::moment() const {
  double s = 0.0;
  for (const Atom& a : atoms) s += a.weight * std::pow(1.0 + a.frequency * a.frequency, 2);
  return s;
}

double NoiseBasis::kernel(double x, double y) const {
  double s = 0.0;
  for (const Mode& m : modes_) s += m(x) * m(y);
  return s;
}

NoiseBasis build_basis(const SpectralMeasure& mu) {
  mu.validate();
  std::vector<Mode> modes;
  for (const Atom& a : mu.atoms) {
    const double amp = std::sqrt(a.weight);
    modes.push_back({a.frequency, amp, false});
    if (a.frequency > 0.0) modes.push_back({a.frequency, amp, true});
  }
  return NoiseBasis(std::move(modes));
}

double covariance(const SpectralMeasure& mu, double x, double y) {
  double s = 0.0;
  for (const Atom& a : mu.atoms) s += a.weight * std::cos(a.frequency * (x - y));
  return s;
}

std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> c, std::array<uint32_t, 2> k) {
  constexpr uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kW0;
      k[1] += kW1;
    }
    const uint64_t p0 = static_cast<uint64_t>(kM0) * c[0];
    const uint64_t p1 = static_cast<uint64_t>(kM1) * c[2];
    c = {static_cast<uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<uint32_t>(p1),
         static_cast<uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<uint32_t>(p0)};
  }
  return c;
}

RngStream::RngStream(uint64_t seed, uint64_t trajectory, uint64_t step)
    : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
      counter_{static_cast<uint32_t>(trajectory), static_cast<uint32_t>(trajectory >> 32),
               static_cast<uint32_t>(step), 0u} {
  if (step >> 32) throw Error(ErrorCode::InvalidArgument, "step index exceeds 32 bits");
}

void RngStream::refill() {
  block_ = philox4x32(counter_, key_);
  ++counter_[3];
  used_ = 0;
}

double RngStream::uniform() {
  if (used_ > 2) refill();
  const uint64_t bits = (static_cast<uint64_t>(block_[used_]) << 32) | block_[used_ + 1];
  used_ += 2;
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform(), u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * M_PI * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * M_PI * u2);
}

NoiseIncrement sample_increment(const NoiseBasis& basis, double dt, RngStream& rng) {
  if (!(dt > 0.0)) throw Error(ErrorCode::NonpositiveDt, "increment time step must be positive");
  NoiseIncrement inc;
  inc.dt = dt;
  inc.coeffs.resize(basis.dim());
  const double s = std::sqrt(dt);
  for (double& c : inc.coeffs) c = s * rng.normal();
  return inc;
}

GridFunction evaluate_field(const std::vector<double>& coeffs, const NoiseBasis& basis,
                            const GridFunction& lattice) {
  if (static_cast<int>(coeffs.size()) != basis.dim()) {
    std::ostringstream os;
    os << "increment has " << coeffs.size() << " coefficients, basis has " << basis.dim();
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
  GridFunction out(lattice.origin(), lattice.spacing(), lattice.size(), 1);
  for (int i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (int k = 0; k < basis.dim(); ++k) s += coeffs[k] * basis.mode(k)(out.x(i));
    out.at(i, 0) = s;
  }
  return out;
}

GridFunction evaluate_field(const NoiseIncrement& inc, const NoiseBasis& basis,
                            const GridFunction& lattice) {
  return evaluate_field(inc.coeffs, basis, lattice);
}

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Weighted spectral energy of x -> exp(-x^2/2) mode(x) sampled with n nodes on
// [-L, L), zero-padded by `pad`.
double weighted_spectral_energy(const NoiseBasis& basis, int n, int pad) {
  constexpr double L = 40.0;
  const double dx = 2.0 * L / n;
  const int np = n * pad;
  std::vector<double> in(np, 0.0);
  std::vector<fftw_complex> out(np / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(np, in.data(), out.data(), FFTW_ESTIMATE);
  }
  const double dxi = 2.0 * M_PI / (np * dx);
  double total = 0.0;
  for (const Mode& m : basis.modes()) {
    if (m.amplitude == 0.0) continue;
    std::fill(in.begin(), in.end(), 0.0);
    for (int j = 0; j < n; ++j) {
      const double x = -L + j * dx;
      in[j] = std::exp(-0.5 * x * x) * m(x);
    }
    fftw_execute(plan);
    double s = 0.0;
    for (int k = 0; k <= np / 2; ++k) {
      const double xi = k * dxi;
      const double w = std::pow(1.0 + xi * xi, 2);
      const double mag = (out[k][0] * out[k][0] + out[k][1] * out[k][1]) * dx * dx / (2.0 * M_PI);
      s += (k == 0 || k == np / 2 ? 1.0 : 2.0) * w * mag;
    }
    total += s * dxi;
  }
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return total;
}

}  // namespace

double hs_embedding_norm(const SpectralMeasure& mu) {
  if (mu.atoms.empty()) return 0.0;
  const NoiseBasis basis = build_basis(mu);
  double fmax = 0.0;
  for (const Atom& a : mu.atoms) fmax = std::max(fmax, a.frequency);
  const double dx_max = M_PI / (fmax + 12.0);
  int n = 2048;
  while (80.0 / n > dx_max) n *= 2;
  const double coarse = weighted_spectral_energy(basis, n, 1);
  const double fine = weighted_spectral_energy(basis, n, 2);
  if (std::abs(fine - coarse) > 0.01 * std::abs(fine)) {
    std::ostringstream os;
    os << "frequency refinement changed the value from " << coarse << " to " << fine;
    throw Error(ErrorCode::QuadratureNotConverged, os.str());
  }
  return fine;
}

double multiplication_hs_norm(const GridFunction& g, const NoiseBasis& basis, double a, double b,
                              int order) {
  double total = 0.0;
  GridFunction prod = g.zeros_like();
  for (const Mode& m : basis.modes()) {
    for (int i = 0; i < g.size(); ++i) {
      const double e = m(g.x(i));
      for (int c = 0; c < g.dim(); ++c) prod.at(i, c) = g.at(i, c) * e;
    }
    total += sobolev_norm_squared(prod, a, b, order);
  }
  return std::sqrt(total);
}

double multiplication_hs_constant(const NoiseBasis& basis) {
  double s = 0.0;
  for (const Mode& m : basis.modes())
    s += m.amplitude * m.amplitude * std::pow(1.0 + m.frequency * m.frequency, 2);
  return std::sqrt(12.0 * s);
}

}  // namespace geowave::noise
