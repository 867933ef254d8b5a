#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "geowave/function_spaces.hpp"

namespace geowave::noise {

/// An atom (x_j, w_j) with x_j > 0 stands for the symmetric pair +-x_j, each
/// carrying weight w_j / 2.
struct Atom {
  double frequency = 0.0;
  double weight = 0.0;
};

struct SpectralMeasure {
  std::vector<Atom> atoms;

  void validate() const;
  /// sum_j w_j (1 + x_j^2)^2.
  double moment() const;
};

struct Mode {
  double frequency = 0.0;
  double amplitude = 0.0;
  bool sine = false;

  double operator()(double x) const {
    return sine ? amplitude * std::sin(frequency * x) : amplitude * std::cos(frequency * x);
  }
};

class NoiseBasis {
 public:
  NoiseBasis() = default;
  explicit NoiseBasis(std::vector<Mode> modes) : modes_(std::move(modes)) {}

  int dim() const { return static_cast<int>(modes_.size()); }
  const Mode& mode(int k) const { return modes_[k]; }
  const std::vector<Mode>& modes() const { return modes_; }
  /// sum_k e_k(x) e_k(y).
  double kernel(double x, double y) const;

 private:
  std::vector<Mode> modes_;
};

/// Throws EmptyMeasure when the measure has no atoms.
NoiseBasis build_basis(const SpectralMeasure& mu);

/// sum_j w_j cos(x_j (x - y)).
double covariance(const SpectralMeasure& mu, double x, double y);

/// Philox4x32-10 counter-based generator.
std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> counter, std::array<uint32_t, 2> key);

/// A stream of standard normals keyed by (master seed, trajectory id, step
/// index). Draws depend only on the key and the draw position, never on the
/// thread that performs them.
class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t trajectory, uint64_t step);

  double uniform();  // in (0, 1)
  double normal();

 private:
  void refill();

  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 4> counter_;
  std::array<uint32_t, 4> block_{};
  int used_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct NoiseIncrement {
  std::vector<double> coeffs;
  double dt = 0.0;
};

/// Coefficients i.i.d. N(0, dt). Throws NonpositiveDt for dt <= 0.
NoiseIncrement sample_increment(const NoiseBasis& basis, double dt, RngStream& rng);

/// Scalar field sum_k coeffs_k e_k(x) on the lattice of `lattice`.
GridFunction evaluate_field(const NoiseIncrement& inc, const NoiseBasis& basis,
                            const GridFunction& lattice);
/// Same for a raw coefficient vector.
GridFunction evaluate_field(const std::vector<double>& coeffs, const NoiseBasis& basis,
                            const GridFunction& lattice);

/// sum_k ||F(w^{1/2} e_k)||^2 with weight (1 + xi^2)^2, w(x) = exp(-x^2),
/// by FFT on [-40, 40]. Throws QuadratureNotConverged when refining the
/// frequency step changes the value by more than 1%.
double hs_embedding_norm(const SpectralMeasure& mu);

/// (sum_k ||g e_k||^2_{H^order(a, b)})^{1/2}.
double multiplication_hs_norm(const GridFunction& g, const NoiseBasis& basis, double a, double b,
                              int order);

/// A constant c with multiplication_hs_norm <= c ||g||_{H^order}, for every
/// interval and order <= 2.
double multiplication_hs_constant(const NoiseBasis& basis);

}  // namespace geowave::noise
